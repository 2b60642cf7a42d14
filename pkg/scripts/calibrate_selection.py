"""How often cross-validation picks the true number of subtypes on generated cohorts.

Orderings are drawn at least --min-tau apart so that subtypes are distinct.
Prints each seed's CVIC scores relative to the best one.

Example:
    python3 scripts/calibrate_selection.py --true-T 3 --candidates 1 2 3 4 --seeds 8
"""

import argparse
import time

import numpy as np

from bebms.metrics import kendall_tau_normalized
from bebms.sampler import ChainConfig
from bebms.selection import cross_validate
from bebms.synthgen import GenerationSpec, generate_dataset


def distant_orderings(rng, T, min_tau, N=12):
    while True:
        ranks = np.array([rng.permutation(N) for _ in range(T)])
        if all(kendall_tau_normalized(ranks[i], ranks[j]) >= min_tau for i in range(T) for j in range(i)):
            return ranks


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--true-T", type=int, default=3)
    ap.add_argument("--candidates", type=int, nargs="+", default=[1, 3])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--participants", type=int, default=300)
    ap.add_argument("--k-folds", type=int, default=3)
    ap.add_argument("--iterations", type=int, default=5000)
    ap.add_argument("--replications", type=int, default=1)
    ap.add_argument("--min-tau", type=float, default=0.6)
    args = ap.parse_args()

    hits = 0
    for seed in range(args.seeds):
        ranks = distant_orderings(np.random.default_rng(3000 + seed), args.true_T, args.min_tau)
        ds, _ = generate_dataset(GenerationSpec(1, args.participants, 0.25, seed, orderings=ranks))
        start = time.perf_counter()
        cfg = ChainConfig(iterations=args.iterations, burn_in=args.iterations // 10, seed=seed)
        res = cross_validate(ds, args.candidates, args.k_folds, cfg, replications=args.replications)
        best = min(res.cvic.values())
        rel = {T: round(s - best, 1) for T, s in res.cvic.items()}
        hits += res.selected == args.true_T
        print(f"seed {seed}: picked {res.selected}  cvic - min {rel}  ({time.perf_counter() - start:.0f} s)")
    print(f"true T picked on {hits}/{args.seeds} seeds")


if __name__ == "__main__":
    main()

"""Fit ten experiment-1 cohorts with the true number of subtypes and report the metrics.

Example:
    python3 scripts/desk_experiment1.py --datasets 10 --iterations 10000
"""

import argparse
import time

import numpy as np

from bebms.metrics import adjusted_rand_index, match_and_score_orderings
from bebms.sampler import ChainConfig, run_chain
from bebms.synthgen import GenerationSpec, generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--datasets", type=int, default=10)
    ap.add_argument("--experiment", type=int, default=1)
    ap.add_argument("--participants", type=int, default=300)
    ap.add_argument("--healthy-ratio", type=float, default=0.25)
    ap.add_argument("--iterations", type=int, default=10_000)
    ap.add_argument("--burn-in", type=int, default=500)
    ap.add_argument("--blind", action="store_true")
    args = ap.parse_args()

    print("seed  T  tau    ari    ctrl_stage  seconds")
    taus, stages = [], []
    for seed in range(args.datasets):
        ds, truth = generate_dataset(GenerationSpec(args.experiment, args.participants, args.healthy_ratio, seed))
        cfg = ChainConfig(args.iterations, args.burn_in, seed, truth.n_subtypes, blind=args.blind)
        start = time.perf_counter()
        fit = run_chain(ds, cfg)
        elapsed = time.perf_counter() - start
        tau, _ = match_and_score_orderings(fit.best_sample.S.ranks, truth.ranks)
        prog = truth.subtype_of >= 0
        ari = adjusted_rand_index(truth.subtype_of[prog], fit.ml_subtype[prog]) if truth.n_subtypes > 1 else float("nan")
        taus.append(tau)
        stages.append(fit.control_mean_stage)
        print(f"{seed:4d}  {truth.n_subtypes}  {tau:.3f}  {ari:6.3f}  {fit.control_mean_stage:10.3f}  {elapsed:7.1f}")
    print(f"mean tau {np.mean(taus):.3f} +- {np.std(taus):.3f}; mean control stage {np.mean(stages):.3f}")


if __name__ == "__main__":
    main()

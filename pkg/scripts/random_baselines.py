"""Random-guess baselines for ordering, subtyping, staging and subtype-count estimation.

Example:
    python3 scripts/random_baselines.py
"""

import argparse

import numpy as np

from bebms.metrics import (
    random_ordering_baseline,
    random_stage_baseline,
    random_subtype_ari_baseline,
    random_subtype_count_mae,
)
from bebms.synthgen import GenerationSpec, generate_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--datasets", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    taus, aris, stages = [], [], []
    for seed in range(args.datasets):
        ds, truth = generate_dataset(GenerationSpec(1, 300, 0.25, seed))
        taus.append(random_ordering_baseline(truth.ranks, rng))
        prog = truth.subtype_of >= 0
        if truth.n_subtypes > 1:
            aris.append(random_subtype_ari_baseline(truth.subtype_of[prog], truth.n_subtypes, rng))
        stages.append(random_stage_baseline(int((ds.labels == 0).sum()), ds.n_biomarkers, rng))
    exact_mae = np.mean([abs(x - y) for x in range(1, 6) for y in range(1, 6)])
    print(f"ordering tau      {np.mean(taus):.3f} +- {np.std(taus):.3f}")
    print(f"subtype ARI       {np.mean(aris):.3f} +- {np.std(aris):.3f}")
    print(f"control stage     {np.mean(stages):.3f} +- {np.std(stages):.3f}")
    print(f"subtype-count MAE {random_subtype_count_mae(rng, 100_000):.3f} (exact {exact_mae:.3f})")


if __name__ == "__main__":
    main()

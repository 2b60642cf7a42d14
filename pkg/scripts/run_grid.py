"""Generate, fit and evaluate a grid of synthetic cohorts through the CLI, then aggregate.

Each dataset is fitted with its true number of subtypes. Finished files are
skipped, so an interrupted grid can be resumed by re-running the command.

Example:
    python3 scripts/run_grid.py --out grid --experiments 1 2 8 --participants 150 300 \
        --ratios 0.25 0.5 --replicates 3 --iterations 2000
"""

import argparse
import itertools
from pathlib import Path

from bebms import io as bio
from bebms.cli import dataset_stem, main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--experiments", type=int, nargs="+", default=list(range(1, 12)))
    ap.add_argument("--participants", type=int, nargs="+", default=[50, 100, 200, 500])
    ap.add_argument("--ratios", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    ap.add_argument("--replicates", type=int, default=10)
    ap.add_argument("--iterations", type=int, default=10_000)
    ap.add_argument("--burn-in", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out)
    data, fits, reports = out / "data", out / "fits", out / "reports"
    for d in (fits, reports):
        d.mkdir(parents=True, exist_ok=True)
    for E, J, R in itertools.product(args.experiments, args.participants, args.ratios):
        cli(["generate", "--experiment", str(E), "--participants", str(J), "--healthy-ratio", str(R),
             "--replicates", str(args.replicates), "--seed", str(args.seed), "--out", str(data), "--skip-existing"])  # fmt: skip
        for i in range(args.replicates):
            stem = dataset_stem(E, J, R, i)
            csv_path, truth_path = data / f"{stem}.csv", data / f"{stem}.truth.json"
            if not csv_path.exists():
                continue  # infeasible replicate, already reported by generate
            fit_path, report_path = fits / f"{stem}.fit.json", reports / f"{stem}.report.json"
            if not fit_path.exists():
                T = bio.read_json(truth_path)["n_subtypes"]
                cli(["fit", "--data", str(csv_path), "--subtypes", str(T), "--iterations", str(args.iterations),
                     "--burn-in", str(args.burn_in), "--seed", str(args.seed), "--jobs", str(args.jobs),
                     "--out", str(fit_path)])  # fmt: skip
            if not report_path.exists():
                cli(["evaluate", "--truth", str(truth_path), "--fit", str(fit_path), "--out", str(report_path)])
    all_reports = sorted(str(p) for p in reports.glob("*.report.json"))
    if all_reports:
        cli(["aggregate", "--reports", *all_reports, "--out", str(out / "summary.csv")])
        print(f"{len(all_reports)} reports aggregated into {out / 'summary.csv'}")


if __name__ == "__main__":
    main()

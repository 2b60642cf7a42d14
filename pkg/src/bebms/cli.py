"""Command-line entry point: ``bebms generate | fit | select | evaluate | aggregate``.

Every command is a pure function of its inputs, flags and seed. A JSON file
passed with ``--config`` supplies defaults for any flag (keys are the flag
names with dashes replaced by underscores); explicit flags still win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as bio
from .metrics import adjusted_rand_index, match_and_score_orderings
from .sampler import ChainConfig, run_chain
from .selection import cross_validate, selection_from_scores
from .synthgen import EXPERIMENTS, GenerationSpec, InfeasibleSpecError, generate_dataset, load_params
from .types import DomainError
from .utils import atomic_write_text, default_jobs, derive_seed, parallel_map

logger = logging.getLogger("bebms")


def _ratio_tag(R: float) -> str:
    return format(R, "g")


def dataset_stem(experiment: int, J: int, R: float, replicate: int) -> str:
    return f"exp{experiment}_J{J}_R{_ratio_tag(R)}_rep{replicate}"


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    params, families = load_params(args.params)
    out = Path(args.out)
    failures = 0
    for i in range(args.replicates):
        stem = dataset_stem(args.experiment, args.participants, args.healthy_ratio, i)
        csv_path, truth_path = out / f"{stem}.csv", out / f"{stem}.truth.json"
        if args.skip_existing and csv_path.exists() and truth_path.exists():
            logger.info("skipping existing %s", stem)
            continue
        seed = derive_seed(args.seed, f"generate-exp{args.experiment}-J{args.participants}-R{args.healthy_ratio}", i)
        spec = GenerationSpec(
            args.experiment,
            args.participants,
            args.healthy_ratio,
            seed,
            emission_params=params,
            families=families,
            n_subtypes=args.subtypes,
        )
        try:
            dataset, truth = generate_dataset(spec)
        except InfeasibleSpecError as exc:
            failures += 1
            print(f"error: replicate {i}: {exc}", file=sys.stderr)
            continue
        echo = {
            "experiment": args.experiment,
            "participants": args.participants,
            "healthy_ratio": args.healthy_ratio,
            "root_seed": args.seed,
            "replicate": i,
            "params": args.params,
            "subtypes": args.subtypes,
        }
        bio.write_dataset(dataset, csv_path)
        bio.write_json(bio.truth_to_doc(truth, dataset, {"config": echo}), truth_path)
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# fit


def _fit_one(job):
    dataset, config = job
    return run_chain(dataset, config)


def cmd_fit(args) -> int:
    dataset = bio.read_dataset(args.data)
    start = time.perf_counter()
    configs = [
        ChainConfig(
            iterations=args.iterations,
            burn_in=args.burn_in,
            seed=derive_seed(args.seed, "fit-replication", r),
            n_subtypes=args.subtypes,
            blind=args.blind,
            staging=args.staging,
        )
        for r in range(args.replications)
    ]
    fits = parallel_map(_fit_one, [(dataset, c) for c in configs], jobs=args.jobs)
    logliks = [f.best_sample.loglik for f in fits]
    best = fits[int(np.argmax(logliks))]
    best.runtime_seconds = time.perf_counter() - start
    echo = {
        "data": args.data,
        "subtypes": args.subtypes,
        "iterations": args.iterations,
        "burn_in": args.burn_in,
        "seed": args.seed,
        "blind": args.blind,
        "replications": args.replications,
        "staging": args.staging,
    }
    doc = bio.fit_to_doc(
        best,
        dataset,
        {
            "cli_config": echo,
            "replication_seeds": [c.seed for c in configs],
            "replication_logliks": logliks,
            "selected_replication": int(np.argmax(logliks)),
        },
    )
    bio.write_json(doc, args.out)
    return 0


# ---------------------------------------------------------------------------
# select


def _companion_csv(path: Path) -> Path:
    return path.with_suffix(".csv") if path.suffix == ".json" else path.with_name(path.name + ".csv")


def cmd_select(args) -> int:
    if args.t_min < 1 or args.t_max < args.t_min:
        raise SystemExit("error: need 1 <= --t-min <= --t-max")
    echo = {
        "data": args.data,
        "k_folds": args.k_folds,
        "t_min": args.t_min,
        "t_max": args.t_max,
        "seed": args.seed,
        "iterations": args.iterations,
        "burn_in": args.burn_in,
        "blind": args.blind,
    }
    if args.inject_scores:
        raw = args.inject_scores
        scores = json.loads(Path(raw).read_text() if Path(raw).is_file() else raw)
        result = selection_from_scores(scores)
        echo["inject_scores"] = scores
    else:
        if not args.data:
            raise SystemExit("error: --data is required unless --inject-scores is given")
        dataset = bio.read_dataset(args.data)
        config = ChainConfig(iterations=args.iterations, burn_in=args.burn_in, seed=args.seed, blind=args.blind)
        result = cross_validate(dataset, range(args.t_min, args.t_max + 1), args.k_folds, config, jobs=args.jobs)
    out = Path(args.out)
    doc = {"spec_version": bio.SPEC_VERSION, "config": echo, **result.to_doc()}
    bio.write_json(doc, out)
    atomic_write_text(_companion_csv(out), result.to_csv())
    print(result.selected)
    return 0


# ---------------------------------------------------------------------------
# evaluate / aggregate


def evaluate_docs(truth: dict, fit: dict) -> dict:
    """Metric report comparing a fit document with its ground truth."""
    if truth["biomarker_names"] != fit["biomarker_names"]:
        raise DomainError("truth and fit disagree on biomarker names")
    tau, matching = match_and_score_orderings(np.array(fit["ranks"]), np.array(truth["ranks"]))
    index = {pid: j for j, pid in enumerate(fit["participant_ids"])}
    try:
        rows = np.array([index[pid] for pid in truth["participant_ids"]])
    except KeyError as exc:
        raise DomainError(f"participant {exc.args[0]} missing from fit") from None
    true_sub = np.array(truth["subtype_of"])
    est_sub = np.array(fit["ml_subtype"])[rows]
    est_stage = np.array(fit["ml_stage"])[rows]
    prog = true_sub >= 0
    ari = None
    if truth["n_subtypes"] > 1 and prog.sum() >= 2:
        ari = adjusted_rand_index(true_sub[prog], est_sub[prog])
    controls = ~prog
    return {
        "tau_mean": tau,
        "matching": [list(p) for p in matching],
        "ari": ari,
        "control_mean_stage": float(est_stage[controls].mean()) if controls.any() else None,
        "runtime_seconds": fit.get("runtime_seconds"),
        "T_true": truth["n_subtypes"],
        "T_est": fit["n_subtypes"],
    }


def cmd_evaluate(args) -> int:
    report = evaluate_docs(bio.read_json(args.truth), bio.read_json(args.fit))
    doc = {"spec_version": bio.SPEC_VERSION, "config": {"truth": args.truth, "fit": args.fit}, **report}
    bio.write_json(doc, args.out)
    return 0


AGGREGATE_COLUMNS = ("report", "T_true", "T_est", "tau_mean", "ari", "control_mean_stage", "runtime_seconds")


def cmd_aggregate(args) -> int:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for path in sorted(args.reports):
        rep = bio.read_json(path)
        cells = [Path(path).name] + [rep.get(c) for c in AGGREGATE_COLUMNS[1:]]
        writer.writerow(["" if c is None else c for c in cells])
    atomic_write_text(args.out, buf.getvalue())
    return 0


# ---------------------------------------------------------------------------
# parser


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of flag defaults")
    common.add_argument("--jobs", type=_positive_int, default=default_jobs(), help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bebms", description="Bayesian event-based subtype and stage inference")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="simulate datasets with ground truth")
    g.add_argument("--experiment", type=int, choices=sorted(EXPERIMENTS), required=True)
    g.add_argument("--participants", type=_positive_int, required=True)
    g.add_argument("--healthy-ratio", type=float, required=True)
    g.add_argument("--replicates", type=_positive_int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--params", default=None, help="biomarker parameter JSON (bundled table by default)")
    g.add_argument("--subtypes", type=_positive_int, default=None, help="fix the number of true subtypes")
    g.add_argument("--out", required=True)
    g.add_argument("--skip-existing", action="store_true")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", parents=[common], help="fit orderings, subtypes and stages")
    f.add_argument("--data", required=True)
    f.add_argument("--subtypes", type=_positive_int, default=1)
    f.add_argument("--iterations", type=_positive_int, default=10_000)
    f.add_argument("--burn-in", type=int, default=500)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--blind", action="store_true")
    f.add_argument("--staging", choices=("flat", "balanced"), default=None)
    f.add_argument("--replications", type=_positive_int, default=1)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("select", parents=[common], help="choose T by cross-validation")
    s.add_argument("--data")
    s.add_argument("--k-folds", type=_positive_int, default=5)
    s.add_argument("--t-min", type=int, default=1)
    s.add_argument("--t-max", type=int, default=5)
    s.add_argument("--iterations", type=_positive_int, default=10_000)
    s.add_argument("--burn-in", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--blind", action="store_true")
    s.add_argument("--inject-scores", default=None, help="JSON map T->score (file or literal); skips fitting")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_select)

    e = sub.add_parser("evaluate", parents=[common], help="score a fit against ground truth")
    e.add_argument("--truth", required=True)
    e.add_argument("--fit", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("aggregate", parents=[common], help="collect evaluation reports into a CSV")
    a.add_argument("--reports", nargs="+", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_aggregate)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = set(overrides) - known
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        subparser.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (bio.DatasetParseError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

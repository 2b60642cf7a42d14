"""File formats: dataset CSV, ground-truth JSON, fit JSON, parameter tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .sampler import FitResult
from .synthgen import GroundTruth
from .types import Dataset, EmissionParams, MixturePriors
from .utils import atomic_write_text

SPEC_VERSION = "1.0"
FIT_SCHEMA = "bebms.fit/1"
TRUTH_SCHEMA = "bebms.truth/1"

# Fields that hold wall-clock measurements; excluded from reproducibility checks.
WALL_CLOCK_FIELDS = ("runtime_seconds",)


class DatasetParseError(ValueError):
    pass


def _fmt(x: float) -> str:
    return "" if not np.isfinite(x) else repr(float(x))


def dataset_to_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["participant_id", "diagnosis", *dataset.biomarker_names])
    for pid, z, row, miss in zip(dataset.participant_ids, dataset.labels, dataset.values, dataset.missing_mask):
        writer.writerow([pid, int(z), *("" if m else _fmt(v) for v, m in zip(row, miss))])
    return buf.getvalue()


def write_dataset(dataset: Dataset, path) -> None:
    atomic_write_text(path, dataset_to_csv(dataset))


def read_dataset(path) -> Dataset:
    """Strictly parse a dataset CSV; errors carry the 1-based line number."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetParseError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 4 or header[0] != "participant_id" or header[1] != "diagnosis":
        raise DatasetParseError(f"{path}:1: header must be participant_id,diagnosis,<biomarkers...>")
    names = tuple(header[2:])
    N = len(names)
    ids, labels, values = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != N + 2:
            raise DatasetParseError(f"{path}:{lineno}: expected {N + 2} fields, got {len(row)}")
        if row[1] not in ("0", "1"):
            raise DatasetParseError(f"{path}:{lineno}: diagnosis must be 0 or 1, got {row[1]!r}")
        vals = []
        for cell in row[2:]:
            cell = cell.strip()
            if cell == "":
                vals.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DatasetParseError(f"{path}:{lineno}: not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise DatasetParseError(f"{path}:{lineno}: non-finite value {cell!r}")
            vals.append(v)
        ids.append(row[0])
        labels.append(int(row[1]))
        values.append(vals)
    if not ids:
        raise DatasetParseError(f"{path}: no participant rows")
    values = np.array(values, dtype=float)
    return Dataset(values, np.array(labels), np.isnan(values), names, tuple(ids))


def dumps(doc: dict) -> str:
    return json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(doc: dict, path) -> None:
    atomic_write_text(path, dumps(doc))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def strip_wall_clock(doc):
    """Copy of a document without wall-clock fields (at any depth)."""
    if isinstance(doc, dict):
        return {k: strip_wall_clock(v) for k, v in doc.items() if k not in WALL_CLOCK_FIELDS}
    if isinstance(doc, list):
        return [strip_wall_clock(v) for v in doc]
    return doc


# ---------------------------------------------------------------------------
# parameter tables


def write_params(params: EmissionParams, path, families: dict | None = None) -> None:
    table = params.to_table()
    if families:
        for name, fam in families.items():
            if name in table:
                table[name]["irregular"] = fam
    write_json({"spec_version": SPEC_VERSION, "biomarkers": table}, path)


# ---------------------------------------------------------------------------
# ground truth


def truth_to_doc(truth: GroundTruth, dataset: Dataset, extra: dict | None = None) -> dict:
    names = list(dataset.biomarker_names)
    orders = np.argsort(truth.ranks, axis=1)
    return {
        "spec_version": SPEC_VERSION,
        "schema": TRUTH_SCHEMA,
        "experiment_id": truth.experiment_id,
        "seed": truth.seed,
        "n_subtypes": truth.n_subtypes,
        "biomarker_names": names,
        "ranks": truth.ranks,
        "orderings": [[names[n] for n in row] for row in orders],
        "event_times": truth.event_times,
        "participant_ids": list(dataset.participant_ids),
        "subtype_of": truth.subtype_of,
        "stage_of": truth.stage_of,
        "stage_count": truth.stage_count,
        "dispersion": truth.dispersion,
        "dm_prior": truth.dm_prior,
        **(extra or {}),
    }


# ---------------------------------------------------------------------------
# fits


def fit_to_doc(fit: FitResult, dataset: Dataset, extra: dict | None = None) -> dict:
    best = fit.best_sample
    names = list(fit.biomarker_names or dataset.biomarker_names)
    ranks = best.S.ranks
    return {
        "spec_version": SPEC_VERSION,
        "schema": FIT_SCHEMA,
        "config": asdict(fit.config),
        "staging_rule": fit.config.staging_rule,
        "biomarker_names": names,
        "n_subtypes": int(ranks.shape[0]),
        "ranks": ranks,
        "orderings": [[names[n] for n in row] for row in best.S.orders],
        "emission_params": best.params.to_table(names),
        "priors": {"subtype": best.priors.subtype, "stage": best.priors.stage},
        "best_loglik": best.loglik,
        "best_iteration": best.iteration,
        "participant_ids": list(dataset.participant_ids),
        "ml_subtype": fit.ml_subtype,
        "ml_stage": fit.ml_stage,
        "control_mean_stage": fit.control_mean_stage,
        "acceptance_rate": fit.acceptance_rate,
        "trace": fit.trace,
        "posterior_rank_frequency": fit.posterior_rank_frequency,
        "runtime_seconds": fit.runtime_seconds,
        **(extra or {}),
    }


def fit_model_from_doc(doc: dict):
    """``(ranks, params, priors)`` of the retained sample in a fit document."""
    names = doc["biomarker_names"]
    ranks = np.array(doc["ranks"], dtype=np.int64)
    params = EmissionParams.from_table(doc["emission_params"], names)
    priors = MixturePriors(np.array(doc["priors"]["subtype"]), np.array(doc["priors"]["stage"]))
    return ranks, params, priors

"""Choosing the number of subtypes by stratified cross-validation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .likelihood import total_loglik
from .sampler import ChainConfig, run_chain
from .types import Dataset, DomainError
from .utils import derive_seed, parallel_map

# Scores within this many units of the minimum count as equally good.
SELECTION_MARGIN = 6.0


class FoldFitError(RuntimeError):
    def __init__(self, fold: int, T: int, cause: Exception):
        super().__init__(f"fit failed on fold {fold} (T={T}): {cause}")
        self.fold = fold
        self.T = T


def stratified_kfold(labels, K: int, seed: int) -> list[np.ndarray]:
    """Split participant indices into K folds that preserve the class mix.

    Returns the held-out index array of each fold (sorted).
    """
    labels = np.asarray(labels)
    if K < 2:
        raise DomainError("stratified K-fold needs K >= 2")
    classes, counts = np.unique(labels, return_counts=True)
    if (counts < K).any():
        small = classes[counts < K].tolist()
        raise DomainError(f"classes {small} have fewer than K={K} members")
    splitter = StratifiedKFold(n_splits=K, shuffle=True, random_state=seed % (2**32))
    return [np.sort(test) for _, test in splitter.split(np.zeros(labels.size), labels)]


def heldout_loglik(test: Dataset, fit) -> float:
    """Log-likelihood of held-out participants under a fit's retained sample."""
    best = fit.best_sample
    return total_loglik(test, best.S, best.priors, best.params, blind=fit.config.blind)


def best_of_chains(dataset: Dataset, config: ChainConfig, replications: int = 1):
    """Run ``replications`` chains with derived seeds; keep the highest-likelihood fit."""
    best = None
    for r in range(replications):
        cfg = config if replications == 1 else replace(config, seed=derive_seed(config.seed, "replication", r))
        fit = run_chain(dataset, cfg)
        if best is None or fit.best_sample.loglik > best.best_sample.loglik:
            best = fit
    return best


@dataclass(frozen=True)
class FoldTask:
    T: int
    fold: int
    train: np.ndarray
    test: np.ndarray
    config: ChainConfig
    replications: int = 1


def _run_fold(args):
    dataset, task = args
    try:
        fit = best_of_chains(dataset.subset(task.train), task.config, task.replications)
        return heldout_loglik(dataset.subset(task.test), fit)
    except Exception as exc:  # noqa: BLE001 - re-raised with fold context
        raise FoldFitError(task.fold, task.T, exc) from exc


def fold_tasks(
    dataset: Dataset, T: int, folds: list[np.ndarray], config: ChainConfig, replications: int = 1
) -> list[FoldTask]:
    everyone = np.arange(dataset.n_participants)
    tasks = []
    for i, test in enumerate(folds):
        train = np.setdiff1d(everyone, test)
        cfg = replace(config, n_subtypes=T, seed=derive_seed(config.seed, f"fold-T{T}", i))
        tasks.append(FoldTask(T, i, train, test, cfg, replications))
    return tasks


def cvic_from_fold_logliks(fold_logliks) -> float:
    """Deviance-style criterion: -2 times the summed held-out log-likelihood."""
    return -2.0 * float(np.sum(fold_logliks))


def cvic_for_T(
    dataset: Dataset, T: int, K: int, config: ChainConfig, folds=None, jobs: int = 1, replications: int = 1
):
    """Cross-validated criterion for one candidate T.

    ``K = 1`` is a degenerate case that trains and evaluates on the full
    dataset. Returns ``(cvic, fold_logliks)``.
    """
    if T < 1:
        raise DomainError("T must be >= 1")
    if K == 1:
        cfg = replace(config, n_subtypes=T, seed=derive_seed(config.seed, f"fold-T{T}", 0))
        try:
            fit = best_of_chains(dataset, cfg, replications)
        except Exception as exc:  # noqa: BLE001
            raise FoldFitError(0, T, exc) from exc
        lls = [heldout_loglik(dataset, fit)]
        return cvic_from_fold_logliks(lls), lls
    if folds is None:
        folds = stratified_kfold(dataset.labels, K, derive_seed(config.seed, "folds"))
    tasks = fold_tasks(dataset, T, folds, config, replications)
    lls = parallel_map(_run_fold, [(dataset, t) for t in tasks], jobs=jobs)
    return cvic_from_fold_logliks(lls), lls


def select_T(scores: Mapping[int, float], margin: float = SELECTION_MARGIN) -> int:
    """Smallest T whose score lies within ``margin`` of the best (lowest) score."""
    if not scores:
        raise DomainError("no scores to select from")
    best = min(scores.values())
    return min(T for T, s in scores.items() if s - best < margin)


@dataclass
class SelectionResult:
    t_values: list[int]
    fold_logliks: dict[int, list[float]]
    cvic: dict[int, float]
    selected: int
    k_folds: int

    def to_doc(self) -> dict:
        return {
            "k_folds": self.k_folds,
            "selected_T": self.selected,
            "rows": [
                {
                    "T": T,
                    "fold_loglik": self.fold_logliks.get(T, []),
                    "cvic": self.cvic[T],
                    "selected": T == self.selected,
                }
                for T in self.t_values
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n_folds = max((len(v) for v in self.fold_logliks.values()), default=0)
        writer.writerow(["T", *(f"fold{i}_loglik" for i in range(n_folds)), "cvic", "selected"])
        for T in self.t_values:
            lls = self.fold_logliks.get(T, [])
            cells = [repr(float(v)) for v in lls] + [""] * (n_folds - len(lls))
            writer.writerow([T, *cells, repr(float(self.cvic[T])), int(T == self.selected)])
        return buf.getvalue()


def cross_validate(
    dataset: Dataset,
    t_values,
    K: int,
    config: ChainConfig,
    jobs: int = 1,
    replications: int = 1,
) -> SelectionResult:
    """Run the fold x T grid and select T.

    The same folds are used for every candidate T so that the scores are
    directly comparable.
    """
    t_values = sorted(set(int(t) for t in t_values))
    if not t_values or t_values[0] < 1:
        raise DomainError("candidate T values must be >= 1")
    fold_lls: dict[int, list[float]] = {}
    if K == 1:
        for T in t_values:
            _, fold_lls[T] = cvic_for_T(dataset, T, 1, config, replications=replications)
    else:
        folds = stratified_kfold(dataset.labels, K, derive_seed(config.seed, "folds"))
        tasks = [task for T in t_values for task in fold_tasks(dataset, T, folds, config, replications)]
        results = parallel_map(_run_fold, [(dataset, t) for t in tasks], jobs=jobs)
        for task, ll in zip(tasks, results):
            fold_lls.setdefault(task.T, []).append(float(ll))
    cvic = {T: cvic_from_fold_logliks(fold_lls[T]) for T in t_values}
    finite = {T: s for T, s in cvic.items() if math.isfinite(s)}
    if not finite:
        raise DomainError("every candidate T produced a non-finite criterion")
    return SelectionResult(t_values, fold_lls, cvic, select_T(finite), K)


def selection_from_scores(scores: Mapping[int, float]) -> SelectionResult:
    """Wrap externally supplied scores (e.g. scores computed elsewhere) in a result."""
    scores = {int(T): float(s) for T, s in scores.items()}
    t_values = sorted(scores)
    return SelectionResult(t_values, {}, scores, select_T(scores), 0)

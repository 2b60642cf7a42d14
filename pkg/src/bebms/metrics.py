"""Evaluation metrics and random-guess baselines."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score

from .types import DomainError


def kendall_tau_normalized(a, b) -> float:
    """Fraction of item pairs ordered differently by two rank vectors.

    Both arguments must use the same representation; rank vectors and
    orders of the same pair generally give different distances.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("permutations must be 1-D and of equal length")
    n = a.size
    if n < 2:
        return 0.0
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    discordant = np.count_nonzero(np.triu(da * db < 0, k=1))
    return discordant / (n * (n - 1) / 2)


def tau_cost_matrix(est, truth) -> np.ndarray:
    est = np.atleast_2d(est)
    truth = np.atleast_2d(truth)
    return np.array([[kendall_tau_normalized(e, t) for t in truth] for e in est])


def match_and_score_orderings(est, truth):
    """Optimal one-to-one matching of estimated to true orderings.

    Returns:
        ``(mean_tau, matching)`` where ``matching`` is a list of
        ``(est_index, truth_index)`` pairs of size min(|est|, |truth|).
    """
    cost = tau_cost_matrix(est, truth)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean()), list(zip(rows.tolist(), cols.tolist()))


def adjusted_rand_index(labels_a, labels_b) -> float:
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape:
        raise DomainError("label vectors differ in length")
    if labels_a.size < 2:
        raise DomainError("ARI is undefined for fewer than two participants")
    return float(adjusted_rand_score(labels_a, labels_b))


def control_mean_stage(ml_stage_counts, labels) -> float:
    stages = np.asarray(ml_stage_counts, dtype=float)
    controls = np.asarray(labels) == 0
    if not controls.any():
        raise DomainError("no control participants")
    return float(stages[controls].mean())


def subtype_count_mae(estimates, truths) -> float:
    estimates = np.asarray(estimates, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if estimates.shape != truths.shape:
        raise DomainError("estimates and truths differ in length")
    return float(np.abs(estimates - truths).mean())


def kendalls_w(sequences) -> float:
    """Kendall's coefficient of concordance for T rank vectors over N items."""
    ranks = np.atleast_2d(np.asarray(sequences, dtype=float))
    T, N = ranks.shape
    if T < 2:
        raise DomainError("Kendall's W needs at least two sequences")
    totals = ranks.sum(axis=0)
    S = ((totals - totals.mean()) ** 2).sum()
    return float(12 * S / (T**2 * (N**3 - N)))


# ---------------------------------------------------------------------------
# random baselines


def random_ordering_baseline(truth_ranks, rng: np.random.Generator, n_trials: int = 100) -> float:
    """Mean matched tau when guessing as many uniform orderings as there are true ones."""
    truth_ranks = np.atleast_2d(truth_ranks)
    T, N = truth_ranks.shape
    scores = [
        match_and_score_orderings(np.array([rng.permutation(N) for _ in range(T)]), truth_ranks)[0]
        for _ in range(n_trials)
    ]
    return float(np.mean(scores))


def random_subtype_ari_baseline(true_labels, n_subtypes: int, rng: np.random.Generator, n_trials: int = 100) -> float:
    true_labels = np.asarray(true_labels)
    return float(
        np.mean([adjusted_rand_index(true_labels, rng.integers(n_subtypes, size=true_labels.size)) for _ in range(n_trials)])
    )


def random_stage_baseline(n_controls: int, n_biomarkers: int, rng: np.random.Generator, n_trials: int = 100) -> float:
    """Mean stage count assigned to controls by uniform guessing over 0..N."""
    return float(np.mean([rng.integers(0, n_biomarkers + 1, size=n_controls).mean() for _ in range(n_trials)]))


def random_subtype_count_mae(rng: np.random.Generator, n_trials: int = 10_000, low: int = 1, high: int = 5) -> float:
    """MAE of uniform guesses of T against uniform truths, both on low..high."""
    truths = rng.integers(low, high + 1, size=n_trials)
    guesses = rng.integers(low, high + 1, size=n_trials)
    return subtype_count_mae(guesses, truths)

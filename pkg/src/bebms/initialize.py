"""Emission-parameter initialisation: 1-D two-means plus weighted NIG updates."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .types import Dataset, DomainError, EmissionParams

logger = logging.getLogger(__name__)

STD_FLOOR_FRACTION = 1e-6


@dataclass(frozen=True)
class NIGPrior:
    """Normal-Inverse-Gamma prior on an unknown (mean, variance)."""

    m0: float
    n0: float = 1.0
    s0_sq: float = 1.0
    nu0: float = 1.0

    def __post_init__(self):
        if not (self.n0 > 0 and self.nu0 > 0 and self.s0_sq > 0):
            raise DomainError("NIG prior needs n0 > 0, nu0 > 0 and s0_sq > 0")


@dataclass(frozen=True)
class ClusterStats:
    mean: float
    var: float
    size: int


@dataclass(frozen=True)
class TwoMeansResult:
    """Two-means split of one biomarker column.

    ``assignments`` is 0 for the pre-event cluster, 1 for post-event and -1
    for missing cells.
    """

    assignments: np.ndarray
    pre: ClusterStats
    post: ClusterStats
    degenerate: bool = False


def std_floor(column: np.ndarray) -> float:
    """Smallest admissible std for a biomarker column."""
    col = column[np.isfinite(column)]
    span = float(col.max() - col.min()) if col.size else 0.0
    return STD_FLOOR_FRACTION * (span if span > 0 else 1.0)


def _lloyd_1d(x: np.ndarray, max_iter: int = 100) -> np.ndarray:
    lo, hi = np.percentile(x, [10, 90])
    if lo == hi:
        lo, hi = x.min(), x.max()
    centers = np.array([lo, hi], dtype=float)
    assign = None
    for _ in range(max_iter):
        new = (np.abs(x - centers[1]) < np.abs(x - centers[0])).astype(np.int64)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for c in (0, 1):
            if (assign == c).any():
                centers[c] = x[assign == c].mean()
    return assign


def kmeans_two_cluster(column, labels, blind: bool = False, missing=None) -> TwoMeansResult:
    """Split one biomarker into pre- and post-event clusters.

    All observed values are clustered together; the cluster holding the
    majority of controls becomes the pre-event cluster. Labels are used here
    even in blind mode (initialisation is the one place they are allowed).
    """
    column = np.asarray(column, dtype=float)
    labels = np.asarray(labels)
    observed = np.isfinite(column)
    if missing is not None:
        observed &= ~np.asarray(missing, bool)
    x = column[observed]
    z = labels[observed]
    if x.size < 2:
        raise DomainError("need at least two observed values to cluster")
    if not (z == 0).any():
        raise DomainError("need at least one observed control to label clusters")

    floor_var = std_floor(x) ** 2
    degenerate = False
    if x.min() == x.max():
        # every value identical: both clusters sit on the same point
        degenerate = True
        eps = np.finfo(float).eps * max(1.0, abs(x[0]))
        assign = np.zeros(x.size, np.int64)
        assign[z != 0] = 1
        if not (assign == 1).any():
            assign[-1] = 1
        stats = [ClusterStats(float(x[0]) + (c * 2 - 1) * eps, floor_var, int((assign == c).sum())) for c in (0, 1)]
    else:
        assign = _lloyd_1d(x)
        if assign.min() == assign.max():
            degenerate = True
            order = np.argsort(x, kind="stable")
            assign = np.zeros(x.size, np.int64)
            assign[order[x.size // 2 :]] = 1
        stats = []
        for c in (0, 1):
            xc = x[assign == c]
            stats.append(ClusterStats(float(xc.mean()), max(float(xc.var()), floor_var), int(xc.size)))

    controls = [int(((assign == c) & (z == 0)).sum()) for c in (0, 1)]
    if controls[0] != controls[1]:
        pre = int(np.argmax(controls))
    else:
        # tie: the cluster in which controls look most typical
        score = [
            np.mean(np.abs(x[z == 0] - stats[c].mean) / np.sqrt(stats[c].var)) for c in (0, 1)
        ]
        pre = int(np.argmin(score))

    out = np.full(column.shape, -1, np.int64)
    out[observed] = np.where(assign == pre, 0, 1)
    if degenerate:
        logger.debug("degenerate two-means split (%d observed values)", x.size)
    return TwoMeansResult(out, stats[pre], stats[1 - pre], degenerate)


def nig_update(values, weights, prior: NIGPrior, std_floor: float = 0.0):
    """Weighted conjugate Normal-Inverse-Gamma update.

    Returns ``(mu_hat, sigma_hat)``: the posterior mean m' and the square root
    of the scale s'^2 = [S + nu0 s0^2 + n0 W/n' (xbar - m0)^2] / nu'. The
    scale is used as the variance estimate directly rather than the
    posterior expectation nu' s'^2 / (nu' - 2).

    Entries with zero weight may hold NaN.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise DomainError("values and weights must have the same shape")
    if (weights < 0).any():
        raise DomainError("weights must be non-negative")
    W = float(weights.sum())
    if W <= 0:
        return prior.m0, max(float(np.sqrt(prior.s0_sq)), std_floor)
    x = np.where(weights > 0, values, 0.0)
    if not np.isfinite(x).all():
        raise DomainError("non-finite value at a positively weighted position")
    xbar = float((weights * x).sum() / W)
    S = float((weights * (x - xbar) ** 2).sum())
    n_post = prior.n0 + W
    nu_post = prior.nu0 + W
    m_post = (prior.n0 * prior.m0 + W * xbar) / n_post
    s_sq = (S + prior.nu0 * prior.s0_sq + prior.n0 * W / n_post * (xbar - prior.m0) ** 2) / nu_post
    return m_post, max(float(np.sqrt(s_sq)), std_floor)


def nig_update_columns(filled, weights, m0, n0, s0_sq, nu0, floor):
    """Vectorised :func:`nig_update` over biomarker columns.

    ``filled`` is J x N with missing cells set to 0 and ``weights`` is J x N
    with missing cells weighted 0. Prior arguments are length-N vectors.
    """
    W = weights.sum(axis=0)
    safe_W = np.where(W > 0, W, 1.0)
    xbar = (weights * filled).sum(axis=0) / safe_W
    S = (weights * (filled - xbar) ** 2).sum(axis=0)
    n_post = n0 + W
    nu_post = nu0 + W
    m_post = (n0 * m0 + W * xbar) / n_post
    s_sq = (S + nu0 * s0_sq + n0 * W / n_post * (xbar - m0) ** 2) / nu_post
    mu = np.where(W > 0, m_post, m0)
    sigma = np.where(W > 0, np.sqrt(s_sq), np.sqrt(s0_sq))
    return mu, np.maximum(sigma, floor)


@dataclass(frozen=True)
class NIGPriors:
    """Per-biomarker NIG priors for both states, as parallel vectors."""

    theta: tuple[NIGPrior, ...]
    phi: tuple[NIGPrior, ...]
    floor: np.ndarray

    def vectors(self, which: str):
        priors = self.theta if which == "theta" else self.phi
        return tuple(np.array([getattr(p, f) for p in priors]) for f in ("m0", "n0", "s0_sq", "nu0"))


def init_nig_priors(dataset: Dataset, blind: bool = False) -> NIGPriors:
    """Cluster every biomarker and turn the cluster moments into NIG priors."""
    theta, phi, floors = [], [], []
    for n in range(dataset.n_biomarkers):
        col = dataset.values[:, n]
        res = kmeans_two_cluster(col, dataset.labels, blind=blind, missing=dataset.missing_mask[:, n])
        phi.append(NIGPrior(res.pre.mean, 1.0, res.pre.var, 1.0))
        theta.append(NIGPrior(res.post.mean, 1.0, res.post.var, 1.0))
        floors.append(std_floor(col))
    return NIGPriors(tuple(theta), tuple(phi), np.array(floors))


def initialize_params(dataset: Dataset, blind: bool = False, priors: NIGPriors | None = None) -> EmissionParams:
    """Two-means initial estimates refined by one unit-weight NIG update per cluster."""
    if priors is None:
        priors = init_nig_priors(dataset, blind=blind)
    out = {k: np.empty(dataset.n_biomarkers) for k in ("theta_mean", "theta_std", "phi_mean", "phi_std")}
    for n in range(dataset.n_biomarkers):
        res = kmeans_two_cluster(dataset.values[:, n], dataset.labels, missing=dataset.missing_mask[:, n])
        col = dataset.values[:, n]
        for state, code in (("phi", 0), ("theta", 1)):
            w = (res.assignments == code).astype(float)
            prior = (priors.phi if state == "phi" else priors.theta)[n]
            mu, sigma = nig_update(col, w, prior, std_floor=priors.floor[n])
            out[f"{state}_mean"][n] = mu
            out[f"{state}_std"][n] = sigma
    return EmissionParams(**out, names=dataset.biomarker_names)

"""Exact likelihoods and posteriors of the subtype event-based model.

Everything is computed in log space. Marginalisation over (subtype, stage)
uses a max-shift so that no intermediate term under- or overflows.
Missing measurements contribute nothing: their log-density is taken as 0.
"""

from __future__ import annotations

import logging
import math
import warnings

import numpy as np

from .types import (
    Dataset,
    DomainError,
    EmissionParams,
    MixturePriors,
    PosteriorState,
    as_ranks,
)

logger = logging.getLogger(__name__)

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def log_density_gaussian(x: float, mean: float, std: float) -> float:
    """Log of the normal density N(x; mean, std**2)."""
    if not (math.isfinite(x) and math.isfinite(mean) and math.isfinite(std)):
        raise DomainError("x, mean and std must be finite")
    if std <= 0:
        raise DomainError(f"std must be positive, got {std}")
    z = (x - mean) / std
    return -0.5 * z * z - math.log(std) - _HALF_LOG_2PI


def _logpdf(x, mean, std):
    z = (x - mean) / std
    return -0.5 * z * z - np.log(std) - _HALF_LOG_2PI


def emission_logpdf(values: np.ndarray, observed: np.ndarray, params: EmissionParams):
    """Per-cell post-event and pre-event log-densities, zero at missing cells.

    Returns:
        ``(log_theta, log_phi)``, each shaped like ``values``.
    """
    x = np.where(observed, values, 0.0)
    log_theta = np.where(observed, _logpdf(x, params.theta_mean, params.theta_std), 0.0)
    log_phi = np.where(observed, _logpdf(x, params.phi_mean, params.phi_std), 0.0)
    return log_theta, log_phi


def _row_and_mask(row, mask):
    row = np.asarray(row, dtype=float)
    if row.ndim != 1:
        raise DomainError("row must be 1-D")
    observed = np.isfinite(row)
    if mask is not None:
        observed &= ~np.asarray(mask, dtype=bool)
    return row, observed


def loglik_healthy(row, params: EmissionParams, mask=None) -> float:
    """Log-likelihood of one participant with every biomarker pre-event."""
    row, observed = _row_and_mask(row, mask)
    if row.size != params.n_biomarkers:
        raise DomainError("row length does not match the number of biomarkers")
    if not observed.any():
        warnings.warn("participant has no observed biomarkers; log-likelihood is 0", RuntimeWarning)
        return 0.0
    _, log_phi = emission_logpdf(row, observed, params)
    return float(log_phi.sum())


def loglik_stage(row, ordering_row, k: int, params: EmissionParams, mask=None) -> float:
    """Log-likelihood given one ordering and stage ``k`` (0..N-1).

    Biomarkers whose rank is at most ``k`` are scored under the post-event
    distribution, the rest under the pre-event distribution.
    """
    row, observed = _row_and_mask(row, mask)
    ranks = np.asarray(ordering_row)
    N = row.size
    if ranks.shape != (N,) or not (np.sort(ranks) == np.arange(N)).all():
        raise DomainError("ordering_row must be a permutation of 0..N-1")
    if not 0 <= k <= N - 1:
        raise DomainError(f"stage must lie in 0..{N - 1}, got {k}")
    log_theta, log_phi = emission_logpdf(row, observed, params)
    return float(np.where(ranks <= k, log_theta, log_phi).sum())


def stage_loglik_matrix(log_theta, log_phi, ranks, include_healthy: bool = False) -> np.ndarray:
    """Log-likelihood of every participant under every (subtype, stage).

    Args:
        log_theta, log_phi: J x N per-cell log-densities.
        ranks: T x N rank matrix.
        include_healthy: prepend the stage -1 column (all pre-event).

    Returns:
        J x T x K array with K = N, or N + 1 when ``include_healthy``.
    """
    ranks = as_ranks(ranks)
    orders = np.argsort(ranks, axis=1)
    healthy = log_phi.sum(axis=1)
    diff = log_theta - log_phi
    cum = np.cumsum(diff[:, orders], axis=2)
    cum += healthy[:, None, None]
    if include_healthy:
        J, T, _ = cum.shape
        cum = np.concatenate([np.broadcast_to(healthy[:, None, None], (J, T, 1)), cum], axis=2)
    return cum


def _log(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


def mixture_posteriors(L: np.ndarray, priors: MixturePriors, in_mixture: np.ndarray, healthy_ll: np.ndarray):
    """Normalised posteriors from a J x T x K stage log-likelihood tensor.

    Args:
        L: stage log-likelihoods.
        priors: mixture weights matching ``L``'s T and K.
        in_mixture: length-J boolean; False rows are scored by ``healthy_ll``
            and get all-zero posteriors.
        healthy_ll: length-J log-likelihood used for rows outside the mixture.

    Returns:
        ``(stage_post, subtype_post, participant_loglik)``
    """
    log_joint = L + _log(priors.stage)[None] + _log(priors.subtype)[None, :, None]
    m_tk = log_joint.max(axis=2)
    finite_tk = np.isfinite(m_tk)
    m_tk_safe = np.where(finite_tk, m_tk, 0.0)
    shifted = np.exp(log_joint - m_tk_safe[..., None])
    z_tk = shifted.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        stage_post = shifted / z_tk[..., None]
        lse_tk = np.where(finite_tk, np.log(z_tk) + m_tk_safe, -np.inf)
    m_j = lse_tk.max(axis=1)
    finite_j = np.isfinite(m_j)
    m_j_safe = np.where(finite_j, m_j, 0.0)
    w = np.exp(lse_tk - m_j_safe[:, None])
    z_j = w.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        subtype_post = w / z_j[:, None]
    lse_j = np.where(finite_j, np.log(z_j) + m_j_safe, -np.inf)

    T, K = priors.stage.shape
    bad_tk = ~finite_tk & in_mixture[:, None]
    if bad_tk.any():
        warnings.warn("stage posterior degenerate for some participants; using uniform", RuntimeWarning)
        stage_post[bad_tk] = 1.0 / K
    bad_j = ~finite_j & in_mixture
    if bad_j.any():
        warnings.warn("subtype posterior degenerate for some participants; using uniform", RuntimeWarning)
        subtype_post[bad_j] = 1.0 / T

    out = ~in_mixture
    stage_post[out] = 0.0
    subtype_post[out] = 0.0
    participant_ll = np.where(in_mixture, lse_j, healthy_ll)
    return stage_post, subtype_post, participant_ll


def _check_priors(priors: MixturePriors, ranks: np.ndarray, blind: bool):
    T, N = ranks.shape
    K = N + 1 if blind else N
    if priors.stage.shape != (T, K):
        raise DomainError(f"stage prior must be {T} x {K}, got {priors.stage.shape}")
    if priors.subtype.sum() <= 0 or (priors.stage.sum(axis=1) <= 0).any():
        raise DomainError("degenerate mixture priors")


def loglik_participant(row, z: int, S, priors: MixturePriors, params: EmissionParams, mask=None) -> float:
    """Log-likelihood of one participant.

    ``z = 0`` scores the row as healthy. ``z = 1`` marginalises over
    subtypes and stages 0..N-1. If the stage prior has N + 1 columns the
    label is ignored and stage -1 joins the mixture (label-blind scoring).
    """
    ranks = as_ranks(S)
    row, observed = _row_and_mask(row, mask)
    blind = priors.stage.shape[1] == ranks.shape[1] + 1
    _check_priors(priors, ranks, blind)
    if z == 0 and not blind:
        return loglik_healthy(row, params, ~observed)
    if z not in (0, 1):
        raise DomainError("z must be 0 or 1")
    log_theta, log_phi = emission_logpdf(row[None], observed[None], params)
    L = stage_loglik_matrix(log_theta, log_phi, ranks, include_healthy=blind)
    _, _, ll = mixture_posteriors(L, priors, np.ones(1, bool), log_phi.sum(axis=1))
    return float(ll[0])


def compute_posteriors(
    dataset: Dataset,
    S,
    priors: MixturePriors,
    params: EmissionParams,
    blind: bool = False,
) -> PosteriorState:
    """Stage and subtype posteriors for every participant.

    With ``blind=False`` labelled-healthy participants are scored under the
    all-pre-event likelihood and carry zero posterior rows. With
    ``blind=True`` labels are ignored and the stage support is -1..N-1.
    """
    ranks = as_ranks(S)
    _check_priors(priors, ranks, blind)
    log_theta, log_phi = emission_logpdf(dataset.values, dataset.observed, params)
    L = stage_loglik_matrix(log_theta, log_phi, ranks, include_healthy=blind)
    in_mixture = np.ones(dataset.n_participants, bool) if blind else dataset.labels == 1
    stage_post, subtype_post, ll = mixture_posteriors(L, priors, in_mixture, log_phi.sum(axis=1))
    return PosteriorState(stage_post, subtype_post, float(ll.sum()), ll, -1 if blind else 0)


def total_loglik(dataset: Dataset, S, priors: MixturePriors, params: EmissionParams, blind: bool = False) -> float:
    """Sum of per-participant log-likelihoods."""
    post = compute_posteriors(dataset, S, priors, params, blind=blind)
    bad = ~np.isfinite(post.participant_loglik)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise DomainError(f"non-finite log-likelihood for participant {j} ({dataset.participant_ids[j]})")
    return post.total_loglik


def event_weights(posteriors: PosteriorState, S) -> np.ndarray:
    """Marginal probability of each biomarker being post-/pre-event.

    Returns:
        J x N x 2 array; ``[..., 0]`` is the post-event weight and
        ``[..., 1]`` its complement. Rows with zero posteriors (healthy)
        come out as (0, 1).
    """
    ranks = as_ranks(S)
    stage_post = posteriors.stage_post
    J, T, K = stage_post.shape
    if ranks.shape != (T, K + posteriors.stage_offset):
        raise DomainError("orderings do not match the posterior shape")
    # tail[j, t, c] = P(stage column >= c)
    tail = np.cumsum(stage_post[:, :, ::-1], axis=2)[:, :, ::-1]
    cols = ranks - posteriors.stage_offset  # column index of stage == rank
    picked = tail[:, np.arange(T)[:, None], cols]  # J x T x N
    w_theta = np.einsum("jt,jtn->jn", posteriors.subtype_post, picked)
    np.clip(w_theta, 0.0, 1.0, out=w_theta)
    return np.stack([w_theta, 1.0 - w_theta], axis=2)

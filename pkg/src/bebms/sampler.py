"""Metropolis-Hastings over subtype orderings with emission-parameter refresh.

Each step proposes new orderings by rank swaps, re-estimates the emission
parameters from the posteriors the proposal induces, scores the result and
accepts or rejects the whole move. Mixture weights are resampled from their
Dirichlet conditionals after every accepted move.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .initialize import NIGPriors, init_nig_priors, initialize_params, nig_update_columns
from .likelihood import emission_logpdf, event_weights, mixture_posteriors, stage_loglik_matrix
from .types import (
    Dataset,
    DomainError,
    EmissionParams,
    MixturePriors,
    PosteriorState,
    SubtypeOrderings,
    as_ranks,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 10_000
    burn_in: int = 500
    seed: int = 0
    n_subtypes: int = 1
    blind: bool = False
    dirichlet_alpha: float = 1.0
    # Freezing switches isolate the permutation kernel for exactness checks.
    update_params: bool = True
    update_priors: bool = True
    # Hypothesis weighting for subject-level calls; None picks "flat" for
    # blind fits and "balanced" otherwise (see blind_assign).
    staging: str | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise DomainError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise DomainError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.n_subtypes < 1:
            raise DomainError("n_subtypes must be >= 1")
        if self.dirichlet_alpha <= 0:
            raise DomainError("dirichlet_alpha must be positive")
        if self.staging not in (None, "flat", "balanced"):
            raise DomainError("staging must be 'flat' or 'balanced'")

    @property
    def staging_rule(self) -> str:
        if self.staging is not None:
            return self.staging
        return "flat" if self.blind else "balanced"


@dataclass(frozen=True, eq=False)
class ChainSample:
    """One recorded chain position; ``priors`` are those ``loglik`` was computed under."""

    S: SubtypeOrderings
    params: EmissionParams
    priors: MixturePriors
    loglik: float
    accepted: bool
    iteration: int


@dataclass(eq=False)
class ChainState:
    """Current chain position plus cached per-cell log-densities."""

    ranks: np.ndarray
    params: EmissionParams
    priors: MixturePriors
    posteriors: PosteriorState
    loglik: float
    log_theta: np.ndarray
    log_phi: np.ndarray
    nig: NIGPriors
    # priors under which ``loglik`` was computed; ``priors`` may already be
    # the ones resampled after the last acceptance
    scored_priors: MixturePriors | None = None

    def __post_init__(self):
        if self.scored_priors is None:
            self.scored_priors = self.priors


@dataclass(eq=False)
class FitResult:
    best_sample: ChainSample
    trace: np.ndarray
    posterior_rank_frequency: np.ndarray  # T x N x N: [t, biomarker, rank]
    ml_subtype: np.ndarray
    ml_stage: np.ndarray  # stage counts 0..N
    config: ChainConfig
    biomarker_names: tuple[str, ...] = ()
    acceptance_rate: float = 0.0
    control_mean_stage: float = float("nan")
    runtime_seconds: float = 0.0
    extra: dict = field(default_factory=dict)


def propose(S, rng: np.random.Generator) -> np.ndarray:
    """Swap the ranks of two random biomarkers in one or two random subtypes.

    With two or more subtypes, two distinct subtypes are picked and each gets
    one swap; with a single subtype it gets one swap. The kernel is symmetric.
    """
    ranks = np.array(as_ranks(S), copy=True)
    T, N = ranks.shape
    if N < 2:
        raise DomainError("need at least two biomarkers to propose a swap")
    if T == 1:
        subtypes = (0,)
    else:
        a = int(rng.integers(T))
        b = int(rng.integers(T - 1))
        subtypes = (a, b + (b >= a))
    for t in subtypes:
        i = int(rng.integers(N))
        j = int(rng.integers(N - 1))
        j += j >= i
        ranks[t, i], ranks[t, j] = ranks[t, j], ranks[t, i]
    return ranks


def log_acceptance(loglik_new: float, loglik_old: float) -> float:
    """Log of min(1, exp(new - old)) for a symmetric proposal."""
    return min(0.0, loglik_new - loglik_old)


def accept_move(log_alpha: float, rng: np.random.Generator) -> bool:
    u = rng.random()
    return bool(np.isfinite(log_alpha)) and u < math.exp(log_alpha)


def initial_orderings(n_subtypes: int, n_biomarkers: int, rng: np.random.Generator) -> np.ndarray:
    """Independent uniform permutations, redrawn until rows are distinct (when possible)."""
    distinct_possible = math.factorial(min(n_biomarkers, 20)) >= n_subtypes
    rows: list[np.ndarray] = []
    while len(rows) < n_subtypes:
        cand = rng.permutation(n_biomarkers)
        if distinct_possible and any(np.array_equal(cand, r) for r in rows):
            continue
        rows.append(cand)
    return np.array(rows, dtype=np.int64)


def _in_mixture(dataset: Dataset, blind: bool) -> np.ndarray:
    return np.ones(dataset.n_participants, bool) if blind else dataset.labels == 1


def _score(dataset, ranks, priors, log_theta, log_phi, blind):
    L = stage_loglik_matrix(log_theta, log_phi, ranks, include_healthy=blind)
    sp, sub, ll = mixture_posteriors(L, priors, _in_mixture(dataset, blind), log_phi.sum(axis=1))
    return PosteriorState(sp, sub, float(ll.sum()), ll, -1 if blind else 0)


def refresh_params(dataset: Dataset, weights: np.ndarray, nig: NIGPriors) -> EmissionParams:
    """Re-estimate emission parameters from J x N x 2 soft event assignments."""
    obs = dataset.observed
    x = dataset.filled
    w_theta = np.where(obs, weights[..., 0], 0.0)
    w_phi = np.where(obs, weights[..., 1], 0.0)
    t_mu, t_sd = nig_update_columns(x, w_theta, *nig.vectors("theta"), nig.floor)
    p_mu, p_sd = nig_update_columns(x, w_phi, *nig.vectors("phi"), nig.floor)
    return EmissionParams(t_mu, t_sd, p_mu, p_sd, names=dataset.biomarker_names)


def resample_priors(posteriors: PosteriorState, in_mixture: np.ndarray, alpha: float, rng) -> MixturePriors:
    """Draw mixture weights from their Dirichlet conditionals given posterior counts."""
    sub = posteriors.subtype_post[in_mixture]
    stage = posteriors.stage_post[in_mixture]
    subtype_counts = sub.sum(axis=0)
    stage_counts = np.einsum("jt,jtk->tk", sub, stage)
    pi = rng.dirichlet(alpha + subtype_counts)
    pi_stage = np.stack([rng.dirichlet(alpha + row) for row in stage_counts])
    return MixturePriors(pi / pi.sum(), pi_stage / pi_stage.sum(axis=1, keepdims=True))


def initial_state(
    dataset: Dataset,
    ranks,
    params: EmissionParams,
    priors: MixturePriors,
    nig: NIGPriors,
    blind: bool = False,
) -> ChainState:
    ranks = np.array(as_ranks(ranks))
    log_theta, log_phi = emission_logpdf(dataset.values, dataset.observed, params)
    post = _score(dataset, ranks, priors, log_theta, log_phi, blind)
    return ChainState(ranks, params, priors, post, post.total_loglik, log_theta, log_phi, nig)


def mh_step(
    state: ChainState,
    dataset: Dataset,
    config: ChainConfig,
    rng: np.random.Generator,
    iteration: int = 0,
    proposal: Callable | None = None,
) -> tuple[ChainState, ChainSample]:
    """One Metropolis-Hastings iteration.

    Priors used to score the proposal are the current ones; they are
    resampled only after an acceptance.
    """
    blind = config.blind
    ranks_new = (proposal or propose)(state.ranks, rng)

    if config.update_params:
        interim = _score(dataset, ranks_new, state.priors, state.log_theta, state.log_phi, blind)
        params_new = refresh_params(dataset, event_weights(interim, ranks_new), state.nig)
        log_theta, log_phi = emission_logpdf(dataset.values, dataset.observed, params_new)
    else:
        params_new, log_theta, log_phi = state.params, state.log_theta, state.log_phi

    post_new = _score(dataset, ranks_new, state.priors, log_theta, log_phi, blind)
    ell_new = post_new.total_loglik
    log_alpha = log_acceptance(ell_new, state.loglik)
    if not np.isfinite(ell_new):
        logger.warning("iteration %d: non-finite proposal log-likelihood, rejecting", iteration)
    accepted = accept_move(log_alpha, rng) and np.isfinite(ell_new)

    if accepted:
        priors_new = state.priors
        if config.update_priors:
            priors_new = resample_priors(post_new, _in_mixture(dataset, blind), config.dirichlet_alpha, rng)
        state = ChainState(
            ranks_new, params_new, priors_new, post_new, ell_new, log_theta, log_phi, state.nig, state.priors
        )

    sample = ChainSample(
        S=SubtypeOrderings(state.ranks),
        params=state.params,
        priors=state.scored_priors,
        loglik=state.loglik,
        accepted=bool(accepted),
        iteration=iteration,
    )
    return state, sample


def blind_assign(dataset: Dataset, S, params: EmissionParams, weighting: str = "flat"):
    """Most likely (subtype, stage) per participant from emission parameters alone.

    Labels and fitted mixture weights are ignored. The hypotheses are every
    (subtype, stage) pair plus the event-free state. With ``"flat"`` all
    T*N + 1 hypotheses weigh the same. With ``"balanced"`` the event-free
    state carries half the mass and the other half is spread evenly over
    the T*N disease hypotheses.

    Returns:
        ``(ml_subtype, ml_stage, control_mean_stage)``. Stages are event
        counts (0 = no events). ``ml_subtype`` is the best disease subtype
        even when the event-free hypothesis wins. ``control_mean_stage`` is
        the mean stage count over labelled controls (NaN if none).
    """
    ranks = as_ranks(S)
    T, N = ranks.shape
    log_theta, log_phi = emission_logpdf(dataset.values, dataset.observed, params)
    L = stage_loglik_matrix(log_theta, log_phi, ranks, include_healthy=False)
    healthy = log_phi.sum(axis=1)
    if weighting == "balanced":
        healthy = healthy + math.log(T * N)
    elif weighting != "flat":
        raise DomainError(f"unknown weighting {weighting!r}")
    flat = L.reshape(L.shape[0], T * N)
    best = flat.argmax(axis=1)
    best_ll = flat[np.arange(flat.shape[0]), best]
    ml_subtype = best // N
    ml_stage = np.where(healthy >= best_ll, 0, best % N + 1)
    controls = dataset.labels == 0
    control_mean = float(ml_stage[controls].mean()) if controls.any() else float("nan")
    return ml_subtype.astype(np.int64), ml_stage.astype(np.int64), control_mean


def run_chain(
    dataset: Dataset,
    config: ChainConfig,
    init_ranks=None,
    init_params: EmissionParams | None = None,
    init_priors: MixturePriors | None = None,
    callback: Callable[[ChainSample], None] | None = None,
) -> FitResult:
    """Run one chain and summarise it.

    The best sample is the highest-likelihood state after burn-in. Subject
    level subtype/stage calls come from :func:`blind_assign` on that sample.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    T, N = config.n_subtypes, dataset.n_biomarkers
    K = N + 1 if config.blind else N
    alpha = config.dirichlet_alpha

    nig = init_nig_priors(dataset, blind=config.blind)
    params = init_params if init_params is not None else initialize_params(dataset, config.blind, nig)
    ranks = initial_orderings(T, N, rng) if init_ranks is None else as_ranks(init_ranks)
    if ranks.shape != (T, N):
        raise DomainError(f"initial orderings must be {T} x {N}")
    if init_priors is None:
        init_priors = MixturePriors(rng.dirichlet(np.full(T, alpha)), rng.dirichlet(np.full(K, alpha), size=T))
    state = initial_state(dataset, ranks, params, init_priors, nig, blind=config.blind)

    trace = np.empty(config.iterations)
    rank_counts = np.zeros((T, N, N), dtype=np.int64)
    t_idx = np.arange(T)[:, None]
    n_idx = np.arange(N)[None, :]
    best: ChainSample | None = None
    n_accept = 0
    for i in range(1, config.iterations + 1):
        state, sample = mh_step(state, dataset, config, rng, iteration=i)
        trace[i - 1] = sample.loglik
        n_accept += sample.accepted
        if i > config.burn_in:
            rank_counts[t_idx, n_idx, state.ranks] += 1
            if best is None or sample.loglik > best.loglik:
                best = sample
        if callback is not None:
            callback(sample)
        if i % 1000 == 0:
            logger.debug("iter %d loglik %.3f accept %.3f", i, sample.loglik, n_accept / i)

    freq = rank_counts / (config.iterations - config.burn_in)
    ml_subtype, ml_stage, control_mean = blind_assign(dataset, best.S, best.params, config.staging_rule)
    return FitResult(
        best_sample=best,
        trace=trace,
        posterior_rank_frequency=freq,
        ml_subtype=ml_subtype,
        ml_stage=ml_stage,
        config=config,
        biomarker_names=dataset.biomarker_names,
        acceptance_rate=n_accept / config.iterations,
        control_mean_stage=control_mean,
        runtime_seconds=time.perf_counter() - start,
    )

"""Synthetic cohorts with known subtypes, orderings and stages.

Eleven experiment configurations vary three things: how stages are drawn
(ordinal bell-shaped or flat Dirichlet-multinomial, continuous uniform,
continuous scaled Beta), how measurements are produced (Gaussian event-based,
irregular non-Gaussian mixtures, or sigmoid trajectories) and whether event
positions are ordinal ranks or continuous event times.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .types import Dataset, DomainError, EmissionParams

DM_PRIOR_CHOICES = (0.1, 2.0, 5.0, 20.0)
MIN_PER_SUBTYPE = 10
STAGE_CONCENTRATION = 20.0
SPIKE_WIDTH = 0.01  # narrow-Gaussian width of point-mass components, in units of sigma


class InfeasibleSpecError(ValueError):
    """A generation request cannot satisfy the cohort constraints."""


@dataclass(frozen=True)
class ExperimentConfig:
    stage: str  # "bell" | "flat" | "uniform" | "beta"
    emission: str  # "normal" | "irregular" | "sigmoid"
    event_times: bool = False

    @property
    def ordinal_stage(self) -> bool:
        return self.stage in ("bell", "flat")


EXPERIMENTS: dict[int, ExperimentConfig] = {
    1: ExperimentConfig("bell", "normal"),
    2: ExperimentConfig("bell", "irregular"),
    3: ExperimentConfig("flat", "normal"),
    4: ExperimentConfig("flat", "irregular"),
    5: ExperimentConfig("uniform", "normal"),
    6: ExperimentConfig("uniform", "irregular"),
    7: ExperimentConfig("beta", "irregular"),
    8: ExperimentConfig("uniform", "sigmoid"),
    9: ExperimentConfig("beta", "sigmoid"),
    10: ExperimentConfig("beta", "normal", event_times=True),
    11: ExperimentConfig("beta", "sigmoid", event_times=True),
}


def load_params(path: str | Path | None = None):
    """Read a biomarker parameter file.

    Returns:
        ``(EmissionParams, families)`` where ``families`` maps biomarker name
        to its irregular-distribution family (absent names have none).
    """
    if path is None:
        text = resources.files("bebms").joinpath("data/adni_params.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    table = raw.get("biomarkers", raw)
    params = EmissionParams.from_table(table)
    families = {name: row["irregular"] for name, row in table.items() if "irregular" in row}
    return params, families


def default_params():
    return load_params(None)


@dataclass(frozen=True, eq=False)
class GenerationSpec:
    experiment_id: int
    J: int
    R: float
    seed: int
    emission_params: EmissionParams | None = None
    families: dict | None = None
    # Overrides for controlled studies; None means "sample as usual".
    n_subtypes: int | None = None
    orderings: np.ndarray | None = None
    dispersion: float | None = None
    dm_prior: float | None = None

    def __post_init__(self):
        if self.experiment_id not in EXPERIMENTS:
            raise DomainError(f"unknown experiment {self.experiment_id}")
        if self.emission_params is None:
            params, families = default_params()
            object.__setattr__(self, "emission_params", params)
            if self.families is None:
                object.__setattr__(self, "families", families)
        if not 0 < self.R < 1:
            raise DomainError("healthy ratio must lie in (0, 1)")

    @property
    def n_biomarkers(self) -> int:
        return self.emission_params.n_biomarkers

    @property
    def n_healthy(self) -> int:
        return int(round(self.J * self.R))

    @property
    def n_progressing(self) -> int:
        return self.J - self.n_healthy


@dataclass(frozen=True, eq=False)
class GroundTruth:
    ranks: np.ndarray  # T x N
    subtype_of: np.ndarray  # -1 for healthy
    stage_of: np.ndarray  # -1 for healthy; ordinal or continuous
    dispersion: float
    dm_prior: float
    experiment_id: int
    seed: int
    event_times: np.ndarray | None = None

    @property
    def n_subtypes(self) -> int:
        return self.ranks.shape[0]

    @property
    def stage_count(self) -> np.ndarray:
        """Number of events that have occurred, per participant."""
        out = np.zeros(self.stage_of.size, np.int64)
        prog = self.subtype_of >= 0
        pos = self.event_times if self.event_times is not None else self.ranks
        t = self.subtype_of[prog]
        out[prog] = (pos[t] <= self.stage_of[prog, None]).sum(axis=1)
        return out


@dataclass(frozen=True, eq=False)
class SigmoidParams:
    """Sigmoid trajectory parameters.

    ``flip``, ``span`` and ``slope`` are per biomarker; ``inflection`` is
    T x N (the event position of each biomarker within each subtype).
    """

    flip: np.ndarray
    span: np.ndarray
    slope: np.ndarray
    inflection: np.ndarray

    def __post_init__(self):
        if (np.asarray(self.slope) < 1).any():
            raise DomainError("sigmoid slopes must be >= 1")


# ---------------------------------------------------------------------------
# orderings


def sample_mallows(reference, concentration: float, rng: np.random.Generator) -> np.ndarray:
    """One draw from a Mallows model under Kendall distance (repeated insertion).

    Returns the sampled sequence of items (an order, not ranks). Large
    ``concentration`` piles mass on ``reference``; 0 is uniform.
    """
    seq: list[int] = []
    for i, item in enumerate(reference):
        jumps = np.arange(i + 1)
        p = np.exp(-concentration * jumps)
        jump = int(rng.choice(i + 1, p=p / p.sum()))
        seq.insert(i - jump, int(item))
    return np.array(seq, dtype=np.int64)


def mallows_concentration(dispersion: float) -> float:
    """Map the sampled dispersion value onto the Mallows concentration."""
    return dispersion


def _order_to_ranks(order) -> np.ndarray:
    return np.argsort(np.asarray(order))


def sample_subtype_structure(N: int, rng: np.random.Generator, n_subtypes: int | None = None, dispersion: float | None = None):
    """Draw the number of subtypes, a dispersion and distinct subtype orderings.

    Returns:
        ``(T, ranks, dispersion)`` with ``ranks`` a T x N rank matrix.
    """
    if N < 2:
        raise DomainError("need at least two biomarkers")
    T = int(rng.integers(1, 6)) if n_subtypes is None else int(n_subtypes)
    if T > math.factorial(min(N, 20)):
        raise InfeasibleSpecError(f"cannot draw {T} distinct orderings of {N} biomarkers")
    d = float(rng.uniform(0.01, 0.5)) if dispersion is None else float(dispersion)
    reference = rng.permutation(N)
    rows: list[np.ndarray] = []
    tries = 0
    while len(rows) < T:
        cand = _order_to_ranks(sample_mallows(reference, mallows_concentration(d), rng))
        if any(np.array_equal(cand, r) for r in rows):
            tries += 1
            if tries >= 1000:
                # loosen the model toward uniform so distinct draws become likely
                d /= 2
                tries = 0
            continue
        rows.append(cand)
    return T, np.array(rows, dtype=np.int64), d


def sample_event_times(N: int, T: int, rng: np.random.Generator) -> np.ndarray:
    """T x N continuous event times from Beta(2, 2) * N with distinct induced orderings."""
    rows: list[np.ndarray] = []
    while len(rows) < T:
        cand = rng.beta(2.0, 2.0, size=N) * N
        ranks = _order_to_ranks(np.argsort(cand))
        if any(np.array_equal(ranks, _order_to_ranks(np.argsort(r))) for r in rows):
            continue
        rows.append(cand)
    return np.array(rows)


# ---------------------------------------------------------------------------
# participants


def assign_subtypes(
    n_progressing: int,
    T: int,
    rng: np.random.Generator,
    dm_prior: float | None = None,
    min_per_subtype: int = MIN_PER_SUBTYPE,
    max_tries: int = 10_000,
):
    """Dirichlet-multinomial subtype assignment with a minimum group size.

    Draws are rejected until every subtype has ``min_per_subtype`` members.
    When that keeps failing (tight budgets with a small DM prior) the last
    mixing weights are kept, every subtype gets its minimum, and only the
    remainder is assigned multinomially.

    Returns:
        ``(counts, labels, dm_prior)``; ``labels`` is a shuffled length
        ``n_progressing`` array of subtype indices.
    """
    if n_progressing < min_per_subtype * T:
        raise InfeasibleSpecError(
            f"{n_progressing} progressing participants cannot fill {T} subtypes of {min_per_subtype}"
        )
    if dm_prior is None:
        dm_prior = float(DM_PRIOR_CHOICES[int(rng.integers(len(DM_PRIOR_CHOICES)))])
    for _ in range(max_tries):
        weights = rng.dirichlet(np.full(T, dm_prior))
        counts = rng.multinomial(n_progressing, weights)
        if counts.min() >= min_per_subtype:
            break
    else:
        counts = min_per_subtype + rng.multinomial(n_progressing - min_per_subtype * T, weights)
    labels = rng.permutation(np.repeat(np.arange(T), counts))
    return counts, labels, dm_prior


def bell_stage_base(N: int) -> np.ndarray:
    """Dirichlet base measure: discretised Gaussian over stages, total mass 20."""
    k = np.arange(N)
    w = np.exp(-0.5 * ((k - (N - 1) / 2) / (N / 4)) ** 2)
    return STAGE_CONCENTRATION * w / w.sum()


def sample_stages(experiment_id: int, N: int, labels, rng: np.random.Generator) -> np.ndarray:
    """Stages for progressing participants, aligned with ``labels``."""
    cfg = EXPERIMENTS[experiment_id]
    labels = np.asarray(labels)
    stages = np.empty(labels.size)
    if cfg.ordinal_stage:
        base = bell_stage_base(N) if cfg.stage == "bell" else np.full(N, STAGE_CONCENTRATION / N)
        for t in np.unique(labels):
            idx = np.flatnonzero(labels == t)
            p = rng.dirichlet(base)
            counts = rng.multinomial(idx.size, p)
            stages[idx] = rng.permutation(np.repeat(np.arange(N), counts))
    elif cfg.stage == "uniform":
        stages[:] = rng.uniform(0, N, size=labels.size)
    else:
        stages[:] = rng.beta(5.0, 2.0, size=labels.size) * N
    return stages


# ---------------------------------------------------------------------------
# measurement models


def _irregular_components(family: str):
    """Component samplers ``f(mu, sigma, rng, n)`` and their mixture weights."""

    def spike(offsets):
        def draw(mu, s, rng, n):
            off = np.asarray(offsets)[rng.integers(len(offsets), size=n)]
            return mu + off * s + rng.normal(0, SPIKE_WIDTH * s, size=n)

        return draw

    if family == "cognitive":
        comps = [
            lambda mu, s, rng, n: rng.triangular(mu - 2 * s, mu - 1.5 * s, mu, size=n),
            lambda mu, s, rng, n: rng.normal(mu + s, 0.3 * s, size=n),
            lambda mu, s, rng, n: rng.exponential(0.7 * s, size=n) + (mu - 0.5 * s),
        ]
        return comps, [1 / 3] * 3
    if family == "csf":
        comps = [
            lambda mu, s, rng, n: (rng.pareto(1.5, size=n) + 1.0) * s + (mu - 2 * s),
            lambda mu, s, rng, n: rng.uniform(mu - 1.5 * s, mu + 1.5 * s, size=n),
            lambda mu, s, rng, n: rng.logistic(mu, s, size=n),
        ]
        return comps, [1 / 3] * 3
    if family == "ventricle":
        comps = [
            lambda mu, s, rng, n: rng.beta(0.5, 0.5, size=n) * 4 * s + (mu - 2 * s),
            lambda mu, s, rng, n: mu + rng.choice([-1.0, 1.0], size=n) * rng.exponential(0.4 * s, size=n),
            lambda mu, s, rng, n: rng.normal(mu, 0.5 * s, size=n) + spike([0.0, 2.0])(0.0, s, rng, n),
        ]
        return comps, [1 / 3] * 3
    if family == "wholebrain":
        comps = [
            lambda mu, s, rng, n: rng.gamma(2.0, 0.5 * s, size=n) + (mu - s),
            lambda mu, s, rng, n: rng.weibull(1.0, size=n) * s + (mu - s),
            lambda mu, s, rng, n: rng.normal(mu, 0.5 * s, size=n) + rng.choice([-1.0, 1.0], size=n) * s,
        ]
        return comps, [1 / 3] * 3
    if family == "fusiform":
        comps = [
            lambda mu, s, rng, n: np.clip(
                mu + s * rng.standard_cauchy(size=n) + rng.normal(0, 0.2 * s, size=n), mu - 4 * s, mu + 4 * s
            )
        ]
        return comps, [1.0]
    if family == "midtemp":
        comps = [
            lambda mu, s, rng, n: rng.normal(mu, 0.2 * s, size=n),
            lambda mu, s, rng, n: rng.logistic(mu + s, 2 * s, size=n),
        ]
        return comps, [0.1, 0.9]
    raise KeyError(f"unknown irregular family {family!r}")


IRREGULAR_FAMILIES = ("cognitive", "csf", "ventricle", "wholebrain", "fusiform", "midtemp")


def draw_irregular(family: str, mu: float, sigma: float, rng: np.random.Generator, size: int = 1, return_components: bool = False):
    """Draws from an irregular family around (mu, sigma), jittered and clipped to mu +- 5 sigma."""
    comps, weights = _irregular_components(family)
    which = rng.choice(len(comps), size=size, p=weights)
    out = np.empty(size)
    for c, f in enumerate(comps):
        idx = np.flatnonzero(which == c)
        if idx.size:
            out[idx] = f(mu, sigma, rng, idx.size)
    out += rng.normal(0, 0.2 * sigma, size=size)
    np.clip(out, mu - 5 * sigma, mu + 5 * sigma, out=out)
    return (out, which) if return_components else out


def sample_irregular(
    biomarker,
    state: str,
    params: EmissionParams,
    rng: np.random.Generator,
    size: int = 1,
    families: dict | None = None,
    return_components: bool = False,
):
    """Irregular draws for one biomarker in the ``"pre"`` or ``"post"`` event state."""
    if families is None:
        families = default_params()[1]
    n = params.names.index(biomarker) if isinstance(biomarker, str) else int(biomarker)
    name = params.names[n] if params.names else str(n)
    if name not in families:
        raise KeyError(f"no irregular family for biomarker {name!r}")
    if state == "post":
        mu, sigma = params.theta_mean[n], params.theta_std[n]
    elif state == "pre":
        mu, sigma = params.phi_mean[n], params.phi_std[n]
    else:
        raise DomainError("state must be 'pre' or 'post'")
    return draw_irregular(families[name], mu, sigma, rng, size, return_components)


def generate_ebm(
    position,
    stage: float,
    z: int,
    params: EmissionParams,
    rng: np.random.Generator,
    families: dict | None = None,
) -> np.ndarray:
    """One participant's measurements under the event-based generative model.

    ``position`` is the subtype's rank row (or continuous event times);
    biomarker n is post-event iff ``z == 1`` and ``position[n] <= stage``.
    Pass ``families`` to draw from irregular distributions instead of Gaussians.
    """
    position = np.asarray(position, dtype=float)
    affected = (z == 1) & (position <= stage)
    return _emit_ebm(affected[None, :], params, rng, families)[0]


def _emit_ebm(affected: np.ndarray, params: EmissionParams, rng, families=None) -> np.ndarray:
    J, N = affected.shape
    mu = np.where(affected, params.theta_mean, params.phi_mean)
    sd = np.where(affected, params.theta_std, params.phi_std)
    if families is None:
        return mu + sd * rng.standard_normal((J, N))
    out = np.empty((J, N))
    for n in range(N):
        name = params.names[n] if params.names else str(n)
        if name not in families:
            raise KeyError(f"no irregular family for biomarker {name!r}")
        for flag in (False, True):
            idx = np.flatnonzero(affected[:, n] == flag)
            if idx.size:
                out[idx, n] = draw_irregular(families[name], mu[idx[0], n], sd[idx[0], n], rng, idx.size)
    return out


def make_sigmoid_params(params: EmissionParams, positions: np.ndarray, rng: np.random.Generator) -> SigmoidParams:
    """Direction flips, spans and slopes from emission parameters.

    The inflection of biomarker n in subtype t sits at ``rank + 0.5`` for
    ordinal positions, or at the event time itself for continuous ones.
    """
    span = params.theta_mean - params.phi_mean
    slope = np.maximum(1.0, np.abs(span) / np.sqrt(params.theta_std**2 + params.phi_std**2))
    flip = rng.integers(0, 2, size=params.n_biomarkers)
    positions = np.asarray(positions)
    inflection = positions + 0.5 if np.issubdtype(positions.dtype, np.integer) else positions.astype(float)
    return SigmoidParams(flip, span, slope, inflection)


def sigmoid_offset(stage, sig: SigmoidParams, subtype: int) -> np.ndarray:
    """Deviation from the healthy mean at a given stage."""
    stage = np.asarray(stage, dtype=float)[..., None]
    xi = sig.inflection[subtype]
    sign = np.where(sig.flip == 1, -1.0, 1.0)
    return sign * sig.span / (1.0 + np.exp(-sig.slope * (stage - xi)))


def generate_sigmoid(stage: float, z: int, subtype: int, params: EmissionParams, sig: SigmoidParams, rng) -> np.ndarray:
    """One participant's measurements under the sigmoid trajectory model."""
    base = params.phi_mean + params.phi_std * rng.standard_normal(params.n_biomarkers)
    if z == 0:
        return base
    return base + sigmoid_offset(stage, sig, subtype)


# ---------------------------------------------------------------------------
# end to end


def generate_dataset(spec: GenerationSpec) -> tuple[Dataset, GroundTruth]:
    """Build one synthetic cohort (deterministic given ``spec.seed``)."""
    cfg = EXPERIMENTS[spec.experiment_id]
    rng = np.random.default_rng(spec.seed)
    params = spec.emission_params
    N = params.n_biomarkers
    n_healthy, n_prog = spec.n_healthy, spec.n_progressing
    if n_healthy < 1:
        raise InfeasibleSpecError("spec yields no healthy participants")

    event_times = None
    if spec.orderings is not None:
        ranks = np.atleast_2d(np.asarray(spec.orderings, dtype=np.int64))
        T = ranks.shape[0]
        dispersion = float("nan") if spec.dispersion is None else spec.dispersion
        if cfg.event_times:
            # keep the requested orderings, draw matching continuous times
            times = np.sort(rng.beta(2.0, 2.0, size=(T, N)) * N, axis=1)
            event_times = np.take_along_axis(times, ranks, axis=1)
    elif cfg.event_times:
        T = int(rng.integers(1, 6)) if spec.n_subtypes is None else spec.n_subtypes
        dispersion = float("nan")
        event_times = sample_event_times(N, T, rng)
        ranks = np.argsort(np.argsort(event_times, axis=1), axis=1)
    else:
        T, ranks, dispersion = sample_subtype_structure(N, rng, spec.n_subtypes, spec.dispersion)

    if n_prog < MIN_PER_SUBTYPE * T:
        raise InfeasibleSpecError(
            f"J={spec.J}, R={spec.R} leaves {n_prog} progressing participants, fewer than {MIN_PER_SUBTYPE} x {T} subtypes"
        )
    _, prog_subtype, dm_prior = assign_subtypes(n_prog, T, rng, spec.dm_prior)
    prog_stage = sample_stages(spec.experiment_id, N, prog_subtype, rng)

    positions = event_times if event_times is not None else ranks
    if cfg.emission == "sigmoid":
        sig = make_sigmoid_params(params, positions, rng)
        healthy_x = params.phi_mean + params.phi_std * rng.standard_normal((n_healthy, N))
        prog_x = params.phi_mean + params.phi_std * rng.standard_normal((n_prog, N))
        for t in range(T):
            idx = np.flatnonzero(prog_subtype == t)
            prog_x[idx] += sigmoid_offset(prog_stage[idx], sig, t)
    else:
        families = spec.families if cfg.emission == "irregular" else None
        affected = np.zeros((n_healthy + n_prog, N), bool)
        affected[n_healthy:] = positions[prog_subtype] <= prog_stage[:, None]
        x = _emit_ebm(affected, params, rng, families)
        healthy_x, prog_x = x[:n_healthy], x[n_healthy:]

    values = np.vstack([healthy_x, prog_x])
    labels = np.r_[np.zeros(n_healthy, np.int64), np.ones(n_prog, np.int64)]
    subtype_of = np.r_[np.full(n_healthy, -1), prog_subtype].astype(np.int64)
    stage_of = np.r_[np.full(n_healthy, -1.0), prog_stage]
    perm = rng.permutation(spec.J)
    names = params.names or tuple(f"biomarker_{n}" for n in range(N))
    dataset = Dataset(values[perm], labels[perm], biomarker_names=names)
    truth = GroundTruth(
        ranks=ranks,
        subtype_of=subtype_of[perm],
        stage_of=stage_of[perm],
        dispersion=float(dispersion),
        dm_prior=float(dm_prior),
        experiment_id=spec.experiment_id,
        seed=spec.seed,
        event_times=event_times,
    )
    return dataset, truth

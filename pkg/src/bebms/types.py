"""Domain value types shared across the package.

All types are frozen dataclasses wrapping numpy arrays. Arrays are never
mutated after construction; functions that "update" a value build a new one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class DomainError(ValueError):
    """Raised when an input lies outside an operation's domain."""


def _as_float_array(x, ndim: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise DomainError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Cross-sectional biomarker measurements.

    ``values`` holds NaN wherever ``missing_mask`` is True. Labels are the
    diagnosis flags: 0 for healthy controls, 1 for progressing participants.
    """

    values: np.ndarray
    labels: np.ndarray
    missing_mask: np.ndarray | None = None
    biomarker_names: tuple[str, ...] = ()
    participant_ids: tuple[str, ...] = ()

    def __post_init__(self):
        values = _as_float_array(self.values, 2, "values")
        J, N = values.shape
        if J < 1 or N < 2:
            raise DomainError(f"need J >= 1 and N >= 2, got J={J}, N={N}")
        if self.missing_mask is None:
            mask = ~np.isfinite(values)
        else:
            mask = np.asarray(self.missing_mask, dtype=bool)
            if mask.shape != values.shape:
                raise DomainError("missing_mask shape does not match values")
            mask = mask | ~np.isfinite(values)
        values = np.where(mask, np.nan, values)
        labels = np.asarray(self.labels)
        if labels.shape != (J,):
            raise DomainError(f"labels must have length {J}")
        if not np.isin(labels, (0, 1)).all():
            raise DomainError("labels must contain only 0 or 1")
        labels = labels.astype(np.int64)
        if mask.all(axis=0).any():
            bad = int(np.flatnonzero(mask.all(axis=0))[0])
            raise DomainError(f"biomarker column {bad} is missing for every participant")
        names = tuple(self.biomarker_names) or tuple(f"biomarker_{n}" for n in range(N))
        ids = tuple(self.participant_ids) or tuple(f"p{j:04d}" for j in range(J))
        if len(names) != N or len(ids) != J:
            raise DomainError("biomarker_names / participant_ids have the wrong length")
        for arr in (values, mask, labels):
            arr.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing_mask", mask)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "biomarker_names", names)
        object.__setattr__(self, "participant_ids", ids)

    @property
    def n_participants(self) -> int:
        return self.values.shape[0]

    @property
    def n_biomarkers(self) -> int:
        return self.values.shape[1]

    @cached_property
    def observed(self) -> np.ndarray:
        return ~self.missing_mask

    @cached_property
    def filled(self) -> np.ndarray:
        """Values with missing cells replaced by 0 (safe for weighted sums)."""
        return np.where(self.missing_mask, 0.0, self.values)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            values=self.values[idx],
            labels=self.labels[idx],
            missing_mask=self.missing_mask[idx],
            biomarker_names=self.biomarker_names,
            participant_ids=tuple(self.participant_ids[i] for i in idx),
        )


@dataclass(frozen=True, eq=False)
class SubtypeOrderings:
    """Per-subtype event orderings as a rank matrix.

    ``ranks[t, n]`` is the 0-based position of biomarker ``n`` in subtype
    ``t``'s cascade; ``orders[t, i]`` is the biomarker at position ``i``.
    """

    ranks: np.ndarray

    def __post_init__(self):
        ranks = np.asarray(self.ranks)
        if ranks.ndim == 1:
            ranks = ranks[None, :]
        if ranks.ndim != 2:
            raise DomainError("ranks must be a T x N matrix")
        ranks = ranks.astype(np.int64)
        N = ranks.shape[1]
        if not (np.sort(ranks, axis=1) == np.arange(N)).all():
            raise DomainError("each ordering row must be a permutation of 0..N-1")
        ranks.setflags(write=False)
        object.__setattr__(self, "ranks", ranks)

    @classmethod
    def from_orders(cls, orders) -> "SubtypeOrderings":
        orders = np.atleast_2d(np.asarray(orders, dtype=np.int64))
        return cls(np.argsort(orders, axis=1))

    @property
    def orders(self) -> np.ndarray:
        return np.argsort(self.ranks, axis=1)

    @property
    def n_subtypes(self) -> int:
        return self.ranks.shape[0]

    @property
    def n_biomarkers(self) -> int:
        return self.ranks.shape[1]


def as_ranks(S) -> np.ndarray:
    """Accept a :class:`SubtypeOrderings` or a raw rank matrix."""
    if isinstance(S, SubtypeOrderings):
        return S.ranks
    return np.atleast_2d(np.asarray(S, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class EmissionParams:
    """Shared Gaussian emission parameters: post-event (theta) and pre-event (phi)."""

    theta_mean: np.ndarray
    theta_std: np.ndarray
    phi_mean: np.ndarray
    phi_std: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        arrays = {}
        for name in ("theta_mean", "theta_std", "phi_mean", "phi_std"):
            arr = _as_float_array(getattr(self, name), 1, name).copy()
            if not np.isfinite(arr).all():
                raise DomainError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            arrays[name] = arr
        sizes = {a.size for a in arrays.values()}
        if len(sizes) != 1:
            raise DomainError("emission parameter vectors differ in length")
        if (arrays["theta_std"] <= 0).any() or (arrays["phi_std"] <= 0).any():
            raise DomainError("standard deviations must be strictly positive")
        if self.names and len(self.names) != sizes.pop():
            raise DomainError("names length does not match parameter vectors")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n_biomarkers(self) -> int:
        return self.theta_mean.size

    def to_table(self, names: Sequence[str] | None = None) -> dict[str, dict[str, float]]:
        names = list(names or self.names or [f"biomarker_{n}" for n in range(self.n_biomarkers)])
        return {
            name: {
                "theta_mean": float(self.theta_mean[n]),
                "theta_std": float(self.theta_std[n]),
                "phi_mean": float(self.phi_mean[n]),
                "phi_std": float(self.phi_std[n]),
            }
            for n, name in enumerate(names)
        }

    @classmethod
    def from_table(cls, table: dict, names: Sequence[str] | None = None) -> "EmissionParams":
        names = list(names) if names is not None else list(table)
        missing = [n for n in names if n not in table]
        if missing:
            raise KeyError(f"no emission parameters for biomarkers {missing}")
        cols = {
            key: np.array([table[n][key] for n in names], dtype=float)
            for key in ("theta_mean", "theta_std", "phi_mean", "phi_std")
        }
        return cls(**cols, names=tuple(names))

    def subset(self, idx) -> "EmissionParams":
        idx = np.asarray(idx)
        names = tuple(self.names[i] for i in idx) if self.names else ()
        return EmissionParams(
            self.theta_mean[idx], self.theta_std[idx], self.phi_mean[idx], self.phi_std[idx], names
        )


@dataclass(frozen=True, eq=False)
class MixturePriors:
    """Subtype simplex and per-subtype stage simplexes.

    ``stage`` has N columns for stages 0..N-1, or N+1 columns when the
    healthy stage (-1) is part of the support (label-blind inference); in
    that case column 0 is stage -1.
    """

    subtype: np.ndarray
    stage: np.ndarray

    def __post_init__(self):
        subtype = _as_float_array(self.subtype, 1, "subtype").copy()
        stage = _as_float_array(self.stage, 2, "stage").copy()
        if stage.shape[0] != subtype.size:
            raise DomainError("stage prior must have one row per subtype")
        for arr in (subtype, stage):
            if (arr < 0).any() or not np.isfinite(arr).all():
                raise DomainError("prior entries must be finite and non-negative")
        if abs(subtype.sum() - 1) > 1e-9 or (np.abs(stage.sum(axis=1) - 1) > 1e-9).any():
            raise DomainError("prior rows must each sum to 1")
        subtype.setflags(write=False)
        stage.setflags(write=False)
        object.__setattr__(self, "subtype", subtype)
        object.__setattr__(self, "stage", stage)

    @classmethod
    def uniform(cls, n_subtypes: int, n_stages: int) -> "MixturePriors":
        return cls(
            np.full(n_subtypes, 1.0 / n_subtypes),
            np.full((n_subtypes, n_stages), 1.0 / n_stages),
        )

    @property
    def n_subtypes(self) -> int:
        return self.subtype.size


@dataclass(frozen=True, eq=False)
class PosteriorState:
    """Per-participant stage and subtype posteriors plus the total log-likelihood.

    Rows of participants that belong to no subtype (labelled healthy, when
    labels are used) are all zero.
    """

    stage_post: np.ndarray  # J x T x K
    subtype_post: np.ndarray  # J x T
    total_loglik: float
    participant_loglik: np.ndarray | None = None
    stage_offset: int = 0  # stage value of column 0: 0, or -1 when blind


@dataclass(frozen=True)
class DiseaseStage:
    """Highest event rank reached; -1 means no events."""

    value: int

    def __post_init__(self):
        if self.value < -1:
            raise DomainError("stage must be >= -1")

    def post_event(self, ordering_row) -> np.ndarray:
        """Indices of biomarkers in the post-event state for one ordering row."""
        return np.flatnonzero(np.asarray(ordering_row) <= self.value)

    @property
    def count(self) -> int:
        return self.value + 1

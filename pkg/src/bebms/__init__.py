"""Bayesian event-based model with subtypes.

Infers per-subtype biomarker event orderings, participant subtypes and
disease stages from cross-sectional data with a Metropolis-Hastings sampler
over permutations.
"""

from .initialize import initialize_params, kmeans_two_cluster, nig_update
from .likelihood import compute_posteriors, loglik_healthy, loglik_participant, loglik_stage, total_loglik
from .metrics import (
    adjusted_rand_index,
    kendall_tau_normalized,
    kendalls_w,
    match_and_score_orderings,
)
from .sampler import ChainConfig, FitResult, blind_assign, mh_step, propose, run_chain
from .selection import cross_validate, cvic_for_T, select_T, stratified_kfold
from .synthgen import EXPERIMENTS, GenerationSpec, GroundTruth, generate_dataset
from .types import Dataset, DiseaseStage, DomainError, EmissionParams, MixturePriors, SubtypeOrderings

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "Dataset",
    "DiseaseStage",
    "DomainError",
    "EXPERIMENTS",
    "EmissionParams",
    "FitResult",
    "GenerationSpec",
    "GroundTruth",
    "MixturePriors",
    "SubtypeOrderings",
    "adjusted_rand_index",
    "blind_assign",
    "compute_posteriors",
    "cross_validate",
    "cvic_for_T",
    "generate_dataset",
    "initialize_params",
    "kendall_tau_normalized",
    "kendalls_w",
    "kmeans_two_cluster",
    "loglik_healthy",
    "loglik_participant",
    "loglik_stage",
    "match_and_score_orderings",
    "mh_step",
    "nig_update",
    "propose",
    "run_chain",
    "select_T",
    "stratified_kfold",
    "total_loglik",
]

"""Joint embedding of pairwise links and hyperlinks for multi-level link prediction."""

from .model import (
    HyperObservations,
    ModelConfig,
    OptimizerSettings,
    PairObservations,
    concordance_f,
    hyper_prob,
    hyper_prob_generalized,
    loss_hyper,
    loss_joint,
    loss_pair,
    pair_prob,
    sign_consistency,
)
from .optim import FitError, FitReport, fit, fit_variant, grad_joint, tune_lambda
from .metrics import EvalReport, auc, evaluate, overlap_degree, stratify_by_truth
from .augment import augment_and_refit, build_candidate_pools, embed_observed, select_augmented, tune_delta

__version__ = "0.1.0"

__all__ = [
    "HyperObservations",
    "ModelConfig",
    "OptimizerSettings",
    "PairObservations",
    "concordance_f",
    "hyper_prob",
    "hyper_prob_generalized",
    "loss_hyper",
    "loss_joint",
    "loss_pair",
    "pair_prob",
    "sign_consistency",
    "FitError",
    "FitReport",
    "fit",
    "fit_variant",
    "grad_joint",
    "tune_lambda",
    "EvalReport",
    "auc",
    "evaluate",
    "overlap_degree",
    "stratify_by_truth",
    "augment_and_refit",
    "build_candidate_pools",
    "embed_observed",
    "select_augmented",
    "tune_delta",
]

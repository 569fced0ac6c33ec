"""Tail-risk-aware individualized decision rules.

Estimates rules d(x) in {-1, +1} that maximize the lower-tail (CVaR-style)
criterion of the outcome distribution rather than its mean, from randomized
trial data with known propensities. Ships a difference-of-convex solver with
linear, sparse-linear, and Gaussian-kernel rules, an alternating
threshold/classification solver, a penalized least-squares baseline, a
simulation laboratory, and a CLI experiment runner.
"""

from ._kernels import BACKEND as kernel_backend
from .altsolver import (
    AltConfig,
    AltState,
    ExhaustiveAxisFamily,
    LinearSurrogateFamily,
    WeightedClassificationProblem,
    alternate_fit,
)
from .criteria import (
    CriterionValue,
    cvar_scalar,
    evaluate_m0,
    evaluate_m1,
    evaluate_quantile,
    evaluate_value,
    matched_weights,
)
from .data import (
    CsvSchema,
    RandomSource,
    ScalingTransform,
    TrialDataset,
    TrialRecord,
    load_csv,
    split_kfold,
    write_csv,
)
from .dca import DcaConfig, DcaState, dca_fit, dca_fit_m1, epsilon_argmax, knot_coefficients
from .models import (
    DecisionFunction,
    gaussian_gram,
    load_model,
    median_heuristic,
    save_model,
)
from .pls import PlsModel, pls_fit
from .simlab import (
    EvaluationReport,
    PotentialSample,
    ScenarioSpec,
    SimulatedTrial,
    ValueMetrics,
    generate,
    misclassification,
    normal_cvar,
    value_metrics,
)
from .surrogate import SurrogateParams, s1_value, s2_value, s_value
from .tuning import cv_select, default_bandwidth_grid, default_lambda_grid

__version__ = "0.1.0"

__all__ = [
    "AltConfig",
    "AltState",
    "CriterionValue",
    "CsvSchema",
    "DcaConfig",
    "DcaState",
    "DecisionFunction",
    "EvaluationReport",
    "ExhaustiveAxisFamily",
    "LinearSurrogateFamily",
    "PlsModel",
    "PotentialSample",
    "RandomSource",
    "ScalingTransform",
    "ScenarioSpec",
    "SimulatedTrial",
    "SurrogateParams",
    "TrialDataset",
    "TrialRecord",
    "ValueMetrics",
    "WeightedClassificationProblem",
    "alternate_fit",
    "cv_select",
    "cvar_scalar",
    "dca_fit",
    "dca_fit_m1",
    "default_bandwidth_grid",
    "default_lambda_grid",
    "epsilon_argmax",
    "evaluate_m0",
    "evaluate_m1",
    "evaluate_quantile",
    "evaluate_value",
    "gaussian_gram",
    "generate",
    "kernel_backend",
    "knot_coefficients",
    "load_csv",
    "load_model",
    "matched_weights",
    "median_heuristic",
    "misclassification",
    "normal_cvar",
    "pls_fit",
    "s1_value",
    "s2_value",
    "s_value",
    "save_model",
    "split_kfold",
    "value_metrics",
    "write_csv",
]

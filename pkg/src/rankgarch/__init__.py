"""Rank-based robust estimation of GARCH/GJR models with weighted-bootstrap inference."""

from .analysis import (
    CoverageDesign,
    CoverageReport,
    McDesign,
    McStudyReport,
    QuadConfig,
    ScoreFunctionals,
    are_sign_vs_qmle,
    coverage_experiment,
    mc_study,
    qq_data,
    score_functionals,
)
from .bootstrap import (
    BootstrapRun,
    WeightScheme,
    bootstrap_distribution,
    bootstrap_replicate,
    confidence_intervals,
    draw_weights,
    weight_variance,
    weighted_central_sequence,
)
from .distributions import Innovation, double_exponential, logistic, normal, skew_normal, student_t
from .estimators import (
    FitConfig,
    FitResult,
    estimate_scale,
    fit_lad,
    fit_qmle,
    fit_r_estimator,
    information_matrix,
    intercept_from_ratios,
    moment_start,
    one_step_update,
    rank_central_sequence,
)
from .model import (
    Family,
    ModelSpec,
    ParamVector,
    expansion_coefficients,
    filter_variance,
    filter_variance_gradient,
    residuals,
    unconditional_variance,
    validate_params,
)
from .scores import Score, compute_ranks, score_eval
from .simulate import SimSpec, derive_rng, simulate, simulate_garch, simulate_gjr

__version__ = "0.1.0"

__all__ = [
    "BootstrapRun",
    "CoverageDesign",
    "CoverageReport",
    "Family",
    "FitConfig",
    "FitResult",
    "Innovation",
    "McDesign",
    "McStudyReport",
    "ModelSpec",
    "ParamVector",
    "QuadConfig",
    "Score",
    "ScoreFunctionals",
    "SimSpec",
    "WeightScheme",
    "are_sign_vs_qmle",
    "bootstrap_distribution",
    "bootstrap_replicate",
    "compute_ranks",
    "confidence_intervals",
    "coverage_experiment",
    "derive_rng",
    "double_exponential",
    "draw_weights",
    "estimate_scale",
    "expansion_coefficients",
    "filter_variance",
    "filter_variance_gradient",
    "fit_lad",
    "fit_qmle",
    "fit_r_estimator",
    "information_matrix",
    "intercept_from_ratios",
    "logistic",
    "mc_study",
    "moment_start",
    "normal",
    "one_step_update",
    "qq_data",
    "rank_central_sequence",
    "residuals",
    "score_eval",
    "score_functionals",
    "simulate",
    "simulate_garch",
    "simulate_gjr",
    "skew_normal",
    "student_t",
    "unconditional_variance",
    "validate_params",
    "weight_variance",
    "weighted_central_sequence",
]

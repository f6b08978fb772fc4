"""Shapley-value token attributions and multimodality scores for black-box
image-text predictors.

The package attributes a model's prediction to its input tokens (text
tokens and image patches) with Shapley values, computed either exactly or
with a permutation Monte-Carlo estimator, and aggregates the absolute
attribution mass per modality into a text share (T-SHAP) and its visual
complement (V-SHAP).  A run harness evaluates whole caption/foil datasets,
computes accuracy metrics, and renders static heatmap reports.

Models attach either in process (subclassing ``ValueOracle``) or out of
process over a newline-delimited JSON protocol (see ``mmshap.wire``).
"""

from __future__ import annotations

from . import errors
from .engine import (
    EXACT,
    PERMUTATION_MC,
    EstimatorConfig,
    estimate,
    exact_shapley,
    mc_shapley,
)
from .harness import EvaluationReport, RunConfig, run
from .masking import TilingPlan, build_sample, plan_tiling
from .metrics import (
    PairPrediction,
    pairwise_accuracy,
    spearman,
    threshold_accuracies,
)
from .oracle import (
    BalancedOracle,
    ConstantOracle,
    DerivedLinearOracle,
    InteractionOracle,
    LinearOracle,
    OracleRequest,
    OracleResponse,
    SumOracle,
    AffineOracle,
    UnimodalOracle,
    ValueOracle,
    make_builtin_oracle,
)
from .render import render_report, render_sample_html
from .scoring import DatasetMMStats, MMShapScore, aggregate, format_percent, mm_shap
from .types import (
    IMAGE,
    TEXT,
    CoalitionMask,
    ShapleyAttribution,
    Token,
    TokenizedSample,
    validate_sample,
)
from .wire import HttpOracle, SubprocessOracle, mask_from_hex, mask_to_hex, resolve_oracle

__version__ = "0.1.0"

__all__ = [
    "errors",
    "EXACT",
    "PERMUTATION_MC",
    "EstimatorConfig",
    "estimate",
    "exact_shapley",
    "mc_shapley",
    "EvaluationReport",
    "RunConfig",
    "run",
    "TilingPlan",
    "build_sample",
    "plan_tiling",
    "PairPrediction",
    "pairwise_accuracy",
    "spearman",
    "threshold_accuracies",
    "BalancedOracle",
    "ConstantOracle",
    "DerivedLinearOracle",
    "InteractionOracle",
    "LinearOracle",
    "OracleRequest",
    "OracleResponse",
    "SumOracle",
    "AffineOracle",
    "UnimodalOracle",
    "ValueOracle",
    "make_builtin_oracle",
    "render_report",
    "render_sample_html",
    "DatasetMMStats",
    "MMShapScore",
    "aggregate",
    "format_percent",
    "mm_shap",
    "IMAGE",
    "TEXT",
    "CoalitionMask",
    "ShapleyAttribution",
    "Token",
    "TokenizedSample",
    "validate_sample",
    "HttpOracle",
    "SubprocessOracle",
    "mask_from_hex",
    "mask_to_hex",
    "resolve_oracle",
    "__version__",
]

"""Penalized additive model engine: P-spline bases, REML, AR(1) residuals."""
from .ar1 import ar1_correlation, ar1_whiten, estimate_rho, TooFewResidualPairs
from .basis import (
    BasisBlock,
    SplineBasis,
    build_basis,
    build_raw_basis,
    centering_transform,
    difference_penalty,
)
from .design import (
    Design,
    ModelSpec,
    PenaltyBlock,
    TermKind,
    TermSpec,
    build_design,
    spec_from_text,
    spec_to_text,
)
from .model import dump_model, fit_model
from .predict import PredictionCurve, contrast_interval, predict_with_ci
from .reml import (
    FittedModel,
    RankDeficientDesign,
    REMLNonConvergence,
    fit_reml,
    reml_score,
)

__all__ = [
    "BasisBlock", "SplineBasis", "build_basis", "build_raw_basis",
    "centering_transform", "difference_penalty",
    "Design", "ModelSpec", "PenaltyBlock", "TermKind", "TermSpec",
    "build_design", "spec_from_text", "spec_to_text",
    "ar1_correlation", "ar1_whiten", "estimate_rho", "TooFewResidualPairs",
    "FittedModel", "RankDeficientDesign", "REMLNonConvergence",
    "fit_reml", "reml_score",
    "dump_model", "fit_model",
    "PredictionCurve", "contrast_interval", "predict_with_ci",
]

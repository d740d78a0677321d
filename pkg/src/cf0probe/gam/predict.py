"""Term-subset predictions with Bayesian credible intervals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .design import Design
from .reml import FittedModel


@dataclass(frozen=True)
class PredictionCurve:
    estimate: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def contrast_interval(
    model: FittedModel, rows: np.ndarray, level: float = 0.95
) -> PredictionCurve:
    """Estimate and CI for arbitrary contrast rows c: c beta +/- z * sqrt(c V c')."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != model.p:
        raise ValueError(f"contrast rows have {rows.shape[1]} columns, model has {model.p}")
    est = rows @ model.coefficients
    se = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", rows, model.posterior_cov, rows), 0.0))
    z = norm.ppf(0.5 + level / 2.0)
    return PredictionCurve(est, se, est - z * se, est + z * se)


def predict_with_ci(
    model: FittedModel,
    newdata: dict[str, np.ndarray],
    include: set[str] | None = None,
    level: float = 0.95,
) -> PredictionCurve:
    """Predict over a grid from a subset of model terms.

    ``include`` names the terms contributing to the prediction (the intercept
    is included by naming "intercept"; with ``include=None`` every term
    contributes). Standard errors come from the corresponding sub-blocks of
    the posterior covariance.
    """
    design = model.design
    if not isinstance(design, Design):
        raise ValueError("model carries no design information; fit it via fit_model")
    if include is not None:
        known = set(design.term_names())
        unknown = set(include) - known
        if unknown:
            raise KeyError(f"terms not in model: {sorted(unknown)}; available: {sorted(known)}")
    rows = design.matrix_for(newdata, include)
    return contrast_interval(model, rows, level)

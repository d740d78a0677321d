"""AR(1) residual handling: rho estimation and whitening.

Rows are assumed grouped by trajectory and time-ordered within each
trajectory; ``starts`` flags the first row of every trajectory. Whitening
scales each trajectory's first row by sqrt(1 - rho^2) and replaces later
rows by row - rho * previous row, which turns AR(1)-correlated noise into
white noise, so ordinary least squares on the whitened system equals
generalized least squares on the original one.
"""
from __future__ import annotations

import numpy as np

MIN_RHO_PAIRS = 10


class TooFewResidualPairs(ValueError):
    pass


def _validate_starts(starts: np.ndarray, n: int) -> np.ndarray:
    starts = np.asarray(starts, dtype=bool)
    if starts.shape != (n,):
        raise ValueError(f"starts has shape {starts.shape}, expected ({n},)")
    if n > 0 and not starts[0]:
        raise ValueError("first row must begin a trajectory")
    return starts


def estimate_rho(residuals: np.ndarray, starts: np.ndarray) -> float:
    """Lag-1 autocorrelation over within-trajectory adjacent residual pairs.

    Pairs spanning a trajectory start are skipped; the estimate is the
    Pearson correlation of the remaining (r[t-1], r[t]) pairs.
    """
    r = np.asarray(residuals, dtype=np.float64)
    starts = _validate_starts(starts, r.size)
    interior = ~starts
    interior[0] = False
    idx = np.nonzero(interior)[0]
    if idx.size < MIN_RHO_PAIRS:
        raise TooFewResidualPairs(
            f"only {idx.size} within-trajectory residual pairs (need {MIN_RHO_PAIRS})"
        )
    a = r[idx - 1]
    b = r[idx]
    sa, sb = a.std(), b.std()
    if sa <= 0 or sb <= 0:
        raise ValueError("residuals are constant; lag-1 autocorrelation undefined")
    rho = float(np.corrcoef(a, b)[0, 1])
    return float(np.clip(rho, -0.9999, 0.9999))


def ar1_whiten(
    X: np.ndarray, y: np.ndarray, rho: float, starts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the AR(1) whitening transform to a design matrix and response."""
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be below 1, got {rho}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    starts = _validate_starts(starts, n)
    if X.shape[0] != n:
        raise ValueError(f"X has {X.shape[0]} rows, y has {n}")
    if rho == 0.0:
        return X.copy(), y.copy()
    scale = np.sqrt(1.0 - rho * rho)
    Xw = np.empty_like(X)
    yw = np.empty_like(y)
    Xw[starts] = X[starts] * scale
    yw[starts] = y[starts] * scale
    interior = ~starts
    idx = np.nonzero(interior)[0]
    Xw[idx] = X[idx] - rho * X[idx - 1]
    yw[idx] = y[idx] - rho * y[idx - 1]
    return Xw, yw


def ar1_correlation(n: int, rho: float) -> np.ndarray:
    """Dense AR(1) correlation matrix rho^|i-j| (reference/oracle use)."""
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :])

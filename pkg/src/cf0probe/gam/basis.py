"""Penalized B-spline bases on [0, 1].

Cubic B-splines on equally spaced knots with order-m difference penalties
(P-splines). Identifiable smooths absorb a sum-to-zero constraint over the
observed covariate values, dropping one column.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

DEGREE = 3


@dataclass(frozen=True)
class SplineBasis:
    """k cubic B-spline functions on equally spaced knots spanning [0, 1]."""

    k: int

    def __post_init__(self):
        if self.k < 3:
            raise ValueError(f"basis dimension must be at least 3, got {self.k}")

    @property
    def knots(self) -> np.ndarray:
        # k + 4 knots; the inner span [t[3], t[k]] is exactly [0, 1]
        h = 1.0 / max(self.k - DEGREE, 1)
        return (np.arange(self.k + DEGREE + 1) - DEGREE) * h

    def design(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the basis at x in [0, 1]; rows sum to 1 (partition of unity)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("covariate must be one-dimensional")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariate contains non-finite values")
        if x.size and (x.min() < -1e-12 or x.max() > 1 + 1e-12):
            raise ValueError(
                f"covariate must be rescaled to [0, 1]; observed range "
                f"[{x.min()}, {x.max()}]"
            )
        x = np.clip(x, 0.0, 1.0)
        return BSpline.design_matrix(x, self.knots, DEGREE, extrapolate=False).toarray()


def difference_penalty(k: int, order: int) -> np.ndarray:
    """S = D'D for the order-m difference matrix D; S annihilates polynomials
    of degree below m (order 1 kills constants, order 2 kills lines)."""
    if order not in (1, 2):
        raise ValueError(f"penalty order must be 1 or 2, got {order}")
    if k <= order:
        raise ValueError(f"basis dimension {k} too small for penalty order {order}")
    d = np.diff(np.eye(k), order, axis=0)
    return d.T @ d


def centering_transform(design: np.ndarray) -> np.ndarray:
    """Orthonormal basis Z of the null space of the column-mean constraint.

    design @ Z has zero column means; Z has shape (k, k-1).
    """
    c = design.mean(axis=0)
    norm = np.linalg.norm(c)
    if norm < 1e-12:
        raise ValueError("degenerate centering constraint (zero column means)")
    q, _ = np.linalg.qr(np.atleast_2d(c / norm).T, mode="complete")
    return q[:, 1:]


@dataclass(frozen=True)
class BasisBlock:
    """A smooth's design and penalty, with the centering transform absorbed.

    ``design`` is n x (k-1) for centered blocks; ``transform`` maps raw basis
    evaluations at new covariate values into the constrained space.
    """

    design: np.ndarray
    penalty: np.ndarray
    transform: np.ndarray | None
    basis: SplineBasis
    penalty_order: int

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        raw = self.basis.design(np.asarray(x, dtype=np.float64))
        if self.transform is None:
            return raw
        return raw @ self.transform


def build_basis(x: np.ndarray, k: int, m: int = 2) -> BasisBlock:
    """Centered penalized B-spline block for one smooth term.

    The sum-to-zero constraint over the observed x is absorbed, reducing the
    block to k-1 columns; the difference penalty is transformed accordingly.
    """
    basis = SplineBasis(k)
    raw = basis.design(np.asarray(x, dtype=np.float64))
    z = centering_transform(raw)
    s = difference_penalty(k, m)
    return BasisBlock(raw @ z, z.T @ s @ z, z, basis, m)


def build_raw_basis(x: np.ndarray, k: int, m: int = 1) -> BasisBlock:
    """Uncentered block (factor smooths keep all k columns per level)."""
    basis = SplineBasis(k)
    return BasisBlock(basis.design(np.asarray(x, dtype=np.float64)),
                      difference_penalty(k, m), None, basis, m)

"""Gaussian penalized least squares with REML-selected smoothing parameters.

The restricted likelihood for the model y ~ N(X beta, sigma^2 I) with
quadratic penalty sum_j lambda_j S_j is scored (after profiling sigma^2) as

    score = (n - p0)/2 log(2 pi s2) + |y - X b|^2 / (2 s2)
            + b' S b / (2 s2) + 1/2 log det(X'X + S) - 1/2 logdet+(S)

where p0 is the dimension of the total penalty's null space, s2 the profiled
scale, and logdet+ the product of nonzero penalty eigenvalues. Smoothing
parameters are chosen by derivative-free search over log lambda in
[-12, 12]: a Nelder-Mead pass followed by coordinate-wise golden-section
sweeps, within a hard budget of score evaluations.

Residual sums of squares are computed through a thin QR of X, which stays
accurate even when y lies (almost) in the span of X.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

LOG_LAMBDA_BOUNDS = (-12.0, 12.0)
DEFAULT_BUDGET = 2000
_EIG_RTOL = 1e-10
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class RankDeficientDesign(np.linalg.LinAlgError):
    pass


class REMLNonConvergence(RuntimeError):
    """Budget exhausted before the smoothing search settled; carries best fit."""

    def __init__(self, message: str, best):
        super().__init__(message)
        self.best = best


@dataclass
class FittedModel:
    """A fitted penalized Gaussian model.

    ``lambdas`` and ``edf`` are keyed by penalty label at this level; the
    model-level wrapper re-keys edf by term. ``posterior_cov`` is the
    Bayesian posterior covariance (X'X + S)^-1 * scale of the coefficients.
    """

    coefficients: np.ndarray
    lambdas: dict[str, float]
    rho: float
    scale: float
    posterior_cov: np.ndarray
    edf: dict[str, float]
    edf_by_col: np.ndarray
    total_edf: float
    reml_score: float
    n_obs: int
    column_names: tuple[str, ...] = ()
    design: object = None
    spec: object = None
    fit_info: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.coefficients.size


@dataclass
class _PenaltyGroup:
    cols: slice
    members: list[int]          # indices into the penalty list
    kind: str                   # "single", "eig_plus_ridge", "general"
    eigs: np.ndarray | None     # precomputed eigenvalues (single / eig_plus_ridge)
    ridge_member: int | None = None

    def logdet_plus(self, lams: np.ndarray, penalties) -> tuple[float, int]:
        """(log product of nonzero eigenvalues, rank) of this group's penalty."""
        if self.kind == "single":
            lam = lams[self.members[0]]
            if lam == 0.0 or self.eigs.size == 0:
                return 0.0, 0
            return self.eigs.size * math.log(lam) + float(np.log(self.eigs).sum()), self.eigs.size
        if self.kind == "eig_plus_ridge":
            other = [m for m in self.members if m != self.ridge_member][0]
            vals = lams[other] * self.eigs + lams[self.ridge_member]
            tol = max(float(vals.max()), 0.0) * _EIG_RTOL
            keep = vals > tol
            if not np.any(keep):
                return 0.0, 0
            return float(np.log(vals[keep]).sum()), int(keep.sum())
        total = np.zeros((self.cols.stop - self.cols.start,) * 2)
        for m in self.members:
            pb = penalties[m]
            off = pb.start - self.cols.start
            total[off:off + pb.width, off:off + pb.width] += lams[m] * pb.matrix
        vals = scipy.linalg.eigvalsh(total)
        tol = max(float(vals.max()), 0.0) * _EIG_RTOL * len(vals)
        keep = vals > tol
        if not np.any(keep):
            return 0.0, 0
        return float(np.log(vals[keep]).sum()), int(keep.sum())


def _group_penalties(penalties, p: int) -> list[_PenaltyGroup]:
    spans = [(pb.start, pb.start + pb.width) for pb in penalties]
    parent = list(range(len(penalties)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(penalties)):
        for j in range(i + 1, len(penalties)):
            if spans[i][0] < spans[j][1] and spans[j][0] < spans[i][1]:
                parent[find(i)] = find(j)
    buckets: dict[int, list[int]] = {}
    for i in range(len(penalties)):
        buckets.setdefault(find(i), []).append(i)

    groups = []
    for members in buckets.values():
        lo = min(spans[m][0] for m in members)
        hi = max(spans[m][1] for m in members)
        cols = slice(lo, hi)
        if len(members) == 1:
            pb = penalties[members[0]]
            vals = scipy.linalg.eigvalsh(pb.matrix)
            tol = max(float(vals.max()), 0.0) * _EIG_RTOL * len(vals)
            groups.append(_PenaltyGroup(cols, members, "single", vals[vals > tol]))
            continue
        identities = [m for m in members if penalties[m].is_identity
                      and spans[m] == (lo, hi)]
        if len(members) == 2 and len(identities) == 1:
            other = [m for m in members if m != identities[0]][0]
            if spans[other] == (lo, hi):
                vals = scipy.linalg.eigvalsh(penalties[other].matrix)
                groups.append(_PenaltyGroup(cols, members, "eig_plus_ridge",
                                            np.clip(vals, 0.0, None),
                                            ridge_member=identities[0]))
                continue
        groups.append(_PenaltyGroup(cols, members, "general", None))
    groups.sort(key=lambda g: g.cols.start)
    return groups


class _REMLProblem:
    def __init__(self, X: np.ndarray, y: np.ndarray, penalties):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
            raise ValueError(f"incompatible shapes X {X.shape}, y {y.shape}")
        self.n, self.p = X.shape
        self.penalties = list(penalties)
        for pb in self.penalties:
            if pb.start < 0 or pb.start + pb.width > self.p:
                raise ValueError(f"penalty {pb.label!r} exceeds design columns")
        q, r = scipy.linalg.qr(X, mode="economic")
        self.R = r
        self.z = q.T @ y
        self.c0 = max(float(y @ y - self.z @ self.z), 0.0)
        self.A = r.T @ r
        self.b = X.T @ y
        self.groups = _group_penalties(self.penalties, self.p)
        # null-space dimension of the total penalty with all lambdas active
        rank = 0
        for g in self.groups:
            _, r_g = g.logdet_plus(np.ones(len(self.penalties)), self.penalties)
            rank += r_g
        self.null_dim = self.p - rank
        if self.n <= self.null_dim:
            raise ValueError(
                f"{self.n} observations cannot identify {self.null_dim} "
                f"unpenalized coefficients"
            )

    def _embed(self, lams: np.ndarray) -> np.ndarray:
        S = np.zeros((self.p, self.p))
        for lam, pb in zip(lams, self.penalties):
            if lam != 0.0:
                pb.embed(self.p, lam, S)
        return S

    def _solve(self, lams: np.ndarray):
        S = self._embed(lams)
        H = self.A + S
        try:
            chol = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            ridge = 1e-10 * np.trace(H)
            try:
                chol = scipy.linalg.cho_factor(
                    H + ridge * np.eye(self.p), lower=True, check_finite=False
                )
            except np.linalg.LinAlgError as exc:
                raise RankDeficientDesign(
                    "penalized normal equations are rank deficient "
                    "(even with ridge fallback)"
                ) from exc
        beta = scipy.linalg.cho_solve(chol, self.b, check_finite=False)
        resid = self.z - self.R @ beta
        rss = float(resid @ resid) + self.c0
        penq = float(beta @ (S @ beta))
        return S, chol, beta, rss, penq

    def null_dim_at(self, lams: np.ndarray) -> int:
        active = np.asarray(lams) > 0
        if np.all(active):
            return self.null_dim
        rank = 0
        for g in self.groups:
            _, r_g = g.logdet_plus(np.where(active, lams, 0.0), self.penalties)
            rank += r_g
        return self.p - rank

    def score(self, log_lams: np.ndarray) -> float:
        lams = np.exp(np.asarray(log_lams, dtype=np.float64))
        _, chol, _, rss, penq = self._solve(lams)
        q = max(rss + penq, 1e-300)
        dof = self.n - self.null_dim
        sigma2 = q / dof
        logdet_h = 2.0 * float(np.log(np.diag(chol[0])).sum())
        logdet_s = sum(g.logdet_plus(lams, self.penalties)[0] for g in self.groups)
        return 0.5 * (dof * math.log(2.0 * math.pi * sigma2) + q / sigma2
                      + logdet_h - logdet_s)

    def finalize(self, lams: np.ndarray, score: float | None, evaluations: int,
                 converged: bool) -> FittedModel:
        S, chol, beta, rss, penq = self._solve(lams)
        null_dim = self.null_dim_at(lams)
        dof = self.n - null_dim
        if dof <= 0:
            raise ValueError("no residual degrees of freedom for the scale estimate")
        sigma2 = max(rss + penq, 0.0) / dof
        cov = scipy.linalg.cho_solve(chol, np.eye(self.p), check_finite=False) * sigma2
        cov = 0.5 * (cov + cov.T)
        influence = scipy.linalg.cho_solve(chol, self.A, check_finite=False)
        edf_by_col = np.diag(influence).copy()
        if score is None:
            active = np.asarray(lams) > 0
            if np.all(active):
                score = self.score(np.log(lams))
            else:
                logdet_h = 2.0 * float(np.log(np.diag(chol[0])).sum())
                logdet_s = sum(
                    g.logdet_plus(lams, self.penalties)[0] for g in self.groups
                )
                q = max(rss + penq, 1e-300)
                score = 0.5 * (dof * math.log(2.0 * math.pi * sigma2) + q / sigma2
                               + logdet_h - logdet_s)
        lam_map: dict[str, float] = {}
        edf_map: dict[str, float] = {}
        for lam, pb in zip(lams, self.penalties):
            lam_map[pb.label] = float(lam)
            edf_map[pb.label] = float(edf_by_col[pb.start:pb.start + pb.width].sum())
        return FittedModel(
            coefficients=beta,
            lambdas=lam_map,
            rho=0.0,
            scale=float(sigma2),
            posterior_cov=cov,
            edf=edf_map,
            edf_by_col=edf_by_col,
            total_edf=float(edf_by_col.sum()),
            reml_score=float(score),
            n_obs=self.n,
            fit_info={"evaluations": evaluations, "converged": converged,
                      "penalized_rss": rss + penq, "null_dim": null_dim},
        )


def _golden_section(f, lo: float, hi: float, xtol: float = 5e-3):
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def reml_score(X, y, penalties, log_lambda) -> float:
    """Score the restricted likelihood at a fixed log-lambda vector."""
    prob = _REMLProblem(X, y, penalties)
    log_lams = np.atleast_1d(np.asarray(log_lambda, dtype=np.float64))
    if log_lams.size != len(prob.penalties):
        raise ValueError(f"expected {len(prob.penalties)} log-lambdas, got {log_lams.size}")
    return prob.score(log_lams)


def fit_reml(
    X: np.ndarray,
    y: np.ndarray,
    penalties,
    fixed_lambda=None,
    budget: int = DEFAULT_BUDGET,
    init_log_lambda: np.ndarray | None = None,
) -> FittedModel:
    """Fit the penalized Gaussian model, selecting lambdas by REML.

    With ``fixed_lambda`` (scalar or one value per penalty; zeros allowed)
    the solve is direct. Otherwise the score is minimized over log lambda in
    [-12, 12] by Nelder-Mead followed by coordinate-wise golden-section
    sweeps; exceeding ``budget`` score evaluations without convergence raises
    REMLNonConvergence carrying the best fit so far.
    """
    prob = _REMLProblem(X, y, penalties)
    d = len(prob.penalties)

    if d == 0:
        return prob.finalize(np.empty(0), None, 0, True)

    if fixed_lambda is not None:
        lams = np.broadcast_to(np.asarray(fixed_lambda, dtype=np.float64), (d,)).copy()
        if np.any(lams < 0):
            raise ValueError("fixed lambdas must be non-negative")
        return prob.finalize(lams, None, 1, True)

    lo, hi = LOG_LAMBDA_BOUNDS
    evaluations = [0]
    best = {"x": None, "val": math.inf}

    def f(vec) -> float:
        if evaluations[0] >= budget:
            raise _BudgetExhausted
        evaluations[0] += 1
        vec = np.clip(vec, lo, hi)
        val = prob.score(vec)
        if val < best["val"]:
            best["x"], best["val"] = vec.copy(), val
        return val

    x0 = np.zeros(d) if init_log_lambda is None else np.clip(
        np.asarray(init_log_lambda, dtype=np.float64), lo, hi
    ).copy()
    converged = False
    try:
        f(x0)
        scipy.optimize.minimize(
            f, x0, method="Nelder-Mead",
            bounds=[(lo, hi)] * d,
            options={"maxfev": min(max(40 * d, 120), budget // 3),
                     "xatol": 5e-2, "fatol": 1e-4},
        )
        for sweep in range(15):
            x = best["x"]
            before = best["val"]
            for j in range(d):
                span = (hi - lo) if sweep == 0 and init_log_lambda is None else 2.0
                a = max(lo, x[j] - span)
                b = min(hi, x[j] + span)

                def along(v, j=j, x=x):
                    trial = x.copy()
                    trial[j] = v
                    return f(trial)

                _golden_section(along, a, b, xtol=2e-2)
                x = best["x"]
            if before - best["val"] < 5e-3:
                converged = True
                break
    except _BudgetExhausted:
        pass

    if not converged and evaluations[0] >= budget:
        partial = prob.finalize(np.exp(best["x"]), best["val"], evaluations[0], False)
        raise REMLNonConvergence(
            f"smoothing search did not converge within {budget} score evaluations",
            partial,
        )
    return prob.finalize(np.exp(best["x"]), best["val"], evaluations[0], True)


class _BudgetExhausted(Exception):
    pass

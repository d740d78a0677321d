"""Engine tests: spline bases, design assembly, REML, AR(1), prediction.

Expected values come from independent oracles: dense normal-equation solves,
explicit GLS with the full AR(1) correlation matrix, and direct polynomial
evaluation.
"""
from __future__ import annotations

import numpy as np
import pytest

from cf0probe.gam import (
    ModelSpec,
    PenaltyBlock,
    SplineBasis,
    TermKind,
    TermSpec,
    ar1_correlation,
    ar1_whiten,
    build_basis,
    build_design,
    difference_penalty,
    estimate_rho,
    fit_model,
    fit_reml,
    predict_with_ci,
    reml_score,
    spec_from_text,
    spec_to_text,
    TooFewResidualPairs,
)


def brute_force_penalized_solve(X, y, penalties, lams):
    """Oracle: dense normal equations (X'X + sum lam_j S_j) b = X'y."""
    p = X.shape[1]
    S = np.zeros((p, p))
    for lam, pb in zip(lams, penalties):
        sl = slice(pb.start, pb.start + pb.matrix.shape[0])
        S[sl, sl] += lam * pb.matrix
    return np.linalg.solve(X.T @ X + S, X.T @ y)


# ---------------------------------------------------------------------------
# Basis


def test_partition_of_unity_before_centering():
    basis = SplineBasis(5)
    design = basis.design(np.array([0.0, 0.5, 1.0]))
    assert design.shape == (3, 5)
    np.testing.assert_allclose(design.sum(axis=1), 1.0, atol=1e-12)


def test_order1_penalty_annihilates_constants():
    S = difference_penalty(5, 1)
    np.testing.assert_allclose(S @ np.ones(5), 0.0, atol=1e-12)


def test_order2_penalty_annihilates_lines():
    S = difference_penalty(6, 2)
    line = np.arange(6, dtype=float)
    np.testing.assert_allclose(S @ line, 0.0, atol=1e-12)
    np.testing.assert_allclose(S @ np.ones(6), 0.0, atol=1e-12)


def test_centered_design_has_zero_column_means():
    x = np.linspace(0.0, 1.0, 37)
    block = build_basis(x, 7, 2)
    assert block.design.shape == (37, 6)
    np.testing.assert_allclose(block.design.mean(axis=0), 0.0, atol=1e-12)


def test_unpenalized_smooth_reproduces_quadratic():
    # k=5 cubic B-splines span quadratics; with lam -> 0 the penalized fit
    # must match direct polynomial evaluation at the data points
    x = np.linspace(0.0, 1.0, 40)
    target = 2.0 - 3.0 * x + 1.5 * x**2
    block = build_basis(x, 5, 2)
    X = np.column_stack([np.ones(x.size), block.design])
    fit = fit_reml(X, target, [PenaltyBlock(1, block.penalty, "s")], fixed_lambda=1e-10)
    np.testing.assert_allclose(X @ fit.coefficients, target, atol=1e-8)


def test_basis_rejects_out_of_range_and_bad_k():
    with pytest.raises(ValueError):
        SplineBasis(2)
    with pytest.raises(ValueError):
        SplineBasis(5).design(np.array([0.0, 1.2]))
    with pytest.raises(ValueError):
        SplineBasis(5).design(np.array([0.0, np.nan]))


# ---------------------------------------------------------------------------
# Design assembly


def _toy_dataset(n=63):
    rng = np.random.default_rng(5)
    time = np.tile(np.linspace(0, 1, 21), n // 21)
    onset = np.repeat(np.array(["a", "b", "c"], dtype=object), n // 3)
    word = np.asarray([f"w{i % 5}" for i in range(n)], dtype=object)
    start = np.zeros(n, dtype=bool)
    start[::21] = True
    return {
        "y": rng.normal(size=n),
        "time": time,
        "onset": onset,
        "word": word,
        "start": start,
    }


def test_intercept_plus_smooth_column_count():
    data = _toy_dataset()
    spec = ModelSpec("y", (TermSpec(TermKind.SMOOTH, "time", k=5),))
    design, _ = build_design(data, spec)
    assert design.X.shape[1] == 1 + 4  # centering removes one column


def test_by_factor_smooth_penalty_blocks():
    data = _toy_dataset()
    spec = ModelSpec(
        "y", (TermSpec(TermKind.BY_FACTOR_SMOOTH, "time", "onset", k=5),)
    )
    design, _ = build_design(data, spec)
    # one penalty block per level, identical structure
    assert len(design.penalties) == 3
    shapes = {pb.matrix.shape for pb in design.penalties}
    assert shapes == {(4, 4)}
    np.testing.assert_allclose(design.penalties[0].matrix, design.penalties[1].matrix)


def test_random_effect_identity_penalty():
    levels = [f"c{i:02d}" for i in range(31)]
    data = {
        "y": np.zeros(62),
        "g": np.asarray(levels * 2, dtype=object),
    }
    spec = ModelSpec("y", (TermSpec(TermKind.RANDOM_EFFECT, "g"),))
    design, _ = build_design(data, spec)
    assert design.X.shape[1] == 1 + 31
    assert len(design.penalties) == 1
    np.testing.assert_allclose(design.penalties[0].matrix, np.eye(31))


def test_factor_smooth_has_ridge_and_wiggle_penalties():
    data = _toy_dataset()
    spec = ModelSpec(
        "y", (TermSpec(TermKind.FACTOR_SMOOTH, "time", "word", k=5, penalty_order=1),)
    )
    design, _ = build_design(data, spec)
    assert design.X.shape[1] == 1 + 5 * 5  # uncentered, 5 words
    assert len(design.penalties) == 2
    labels = {pb.label for pb in design.penalties}
    assert any("ridge" in lbl for lbl in labels)


def test_single_level_factor_errors():
    data = {
        "y": np.zeros(42),
        "time": np.tile(np.linspace(0, 1, 21), 2),
        "g": np.asarray(["only"] * 42, dtype=object),
    }
    spec = ModelSpec("y", (TermSpec(TermKind.FACTOR_SMOOTH, "time", "g", k=5),))
    with pytest.raises(ValueError):
        build_design(data, spec)


def test_spec_text_round_trip():
    spec = ModelSpec(
        "zf0",
        (
            TermSpec(TermKind.PARAMETRIC_FACTOR, "onset_class", ref_level="sonorant"),
            TermSpec(TermKind.SMOOTH, "time", k=5),
            TermSpec(TermKind.FACTOR_SMOOTH, "time", "word", k=5, penalty_order=1),
        ),
        ar1="estimate",
        series_start="start",
    )
    assert spec_from_text(spec_to_text(spec)) == spec


# ---------------------------------------------------------------------------
# Penalized solve against the brute-force oracle


def test_penalized_solve_matches_brute_force():
    rng = np.random.default_rng(42)
    for trial in range(40):
        n = int(rng.integers(10, 51))
        p = int(rng.integers(3, 13))
        X = rng.normal(size=(n, p))
        y = rng.normal(size=n)
        width = int(rng.integers(2, p + 1))
        start = int(rng.integers(0, p - width + 1))
        M = rng.normal(size=(width, width))
        penalties = [PenaltyBlock(start, M.T @ M, "S")]
        lam = float(np.exp(rng.uniform(-3, 3)))
        fit = fit_reml(X, y, penalties, fixed_lambda=lam)
        oracle = brute_force_penalized_solve(X, y, penalties, [lam])
        err = np.abs(fit.coefficients - oracle).max() / max(np.abs(oracle).max(), 1e-12)
        assert err < 1e-8, f"trial {trial}: relative error {err}"


def test_lambda_zero_reproduces_ols():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(30, 6))
    y = rng.normal(size=30)
    S = np.eye(3)
    fit = fit_reml(X, y, [PenaltyBlock(2, S, "S")], fixed_lambda=0.0)
    ols = np.linalg.solve(X.T @ X, X.T @ y)
    np.testing.assert_allclose(fit.coefficients, ols, atol=1e-8)


def test_huge_lambda_order1_gives_constant_fit_at_mean():
    rng = np.random.default_rng(11)
    x = np.linspace(0, 1, 60)
    y = np.sin(2 * np.pi * x) + rng.normal(scale=0.1, size=60)
    basis = SplineBasis(8)
    X = basis.design(x)  # uncentered: penalty null space is the constant
    fit = fit_reml(X, y, [PenaltyBlock(0, difference_penalty(8, 1), "S")],
                   fixed_lambda=1e12)
    fitted = X @ fit.coefficients
    np.testing.assert_allclose(fitted, y.mean(), atol=1e-6)


def test_reml_interpolates_exact_signal():
    # y exactly in the span of X with no noise: the smoothing search runs to
    # its lower bound and the fit reproduces y (n large enough that the
    # lambda floor exp(-12) is negligible against X'X)
    rng = np.random.default_rng(3)
    n = 20001
    x = np.linspace(0, 1, n)
    block = build_basis(x, 5, 2)
    X = np.column_stack([np.ones(n), block.design])
    beta_true = rng.normal(size=X.shape[1])
    y = X @ beta_true
    fit = fit_reml(X, y, [PenaltyBlock(1, block.penalty, "s")])
    np.testing.assert_allclose(X @ fit.coefficients, y, atol=1e-6)
    assert fit.total_edf > X.shape[1] - 0.01


def test_reml_score_not_above_grid_corners():
    rng = np.random.default_rng(19)
    x = np.linspace(0, 1, 80)
    y = np.sin(2 * np.pi * x) + rng.normal(scale=0.3, size=80)
    block = build_basis(x, 6, 2)
    X = np.column_stack([np.ones(80), block.design])
    penalties = [PenaltyBlock(1, block.penalty, "s")]
    fit = fit_reml(X, y, penalties)
    for corner in (-12.0, 0.0, 12.0):
        assert fit.reml_score <= reml_score(X, y, penalties, [corner]) + 1e-6


def test_posterior_cov_symmetric_positive_diagonal():
    rng = np.random.default_rng(23)
    X = rng.normal(size=(40, 8))
    y = rng.normal(size=40)
    fit = fit_reml(X, y, [PenaltyBlock(2, np.eye(4), "r")], fixed_lambda=2.0)
    V = fit.posterior_cov
    assert np.abs(V - V.T).max() < 1e-10
    assert np.all(np.diag(V) > 0)


def test_edf_additivity_matches_influence_trace():
    rng = np.random.default_rng(29)
    X = rng.normal(size=(50, 7))
    y = rng.normal(size=50)
    lam = 3.0
    fit = fit_reml(X, y, [PenaltyBlock(1, np.eye(6), "r")], fixed_lambda=lam)
    S = np.zeros((7, 7))
    S[1:, 1:] = lam * np.eye(6)
    F = np.linalg.solve(X.T @ X + S, X.T @ X)
    assert abs(fit.total_edf - np.trace(F)) < 1e-6


def test_adding_constant_shifts_only_intercept():
    rng = np.random.default_rng(31)
    x = np.linspace(0, 1, 63)
    y = np.cos(2 * np.pi * x) + rng.normal(scale=0.2, size=63)
    block = build_basis(x, 5, 2)
    X = np.column_stack([np.ones(63), block.design])
    penalties = [PenaltyBlock(1, block.penalty, "s")]
    fit1 = fit_reml(X, y, penalties, fixed_lambda=0.7)
    fit2 = fit_reml(X, y + 5.0, penalties, fixed_lambda=0.7)
    assert abs((fit2.coefficients[0] - fit1.coefficients[0]) - 5.0) < 1e-8
    np.testing.assert_allclose(fit2.coefficients[1:], fit1.coefficients[1:], atol=1e-8)


def test_nonconvergence_carries_best_fit():
    from cf0probe.gam import REMLNonConvergence

    rng = np.random.default_rng(37)
    x = np.linspace(0, 1, 80)
    y = np.sin(2 * np.pi * x) + rng.normal(scale=0.2, size=80)
    block = build_basis(x, 6, 2)
    X = np.column_stack([np.ones(80), block.design])
    with pytest.raises(REMLNonConvergence) as excinfo:
        fit_reml(X, y, [PenaltyBlock(1, block.penalty, "s")], budget=5)
    assert excinfo.value.best.coefficients.shape == (6,)


# ---------------------------------------------------------------------------
# AR(1)


def test_whiten_identity_at_rho_zero():
    rng = np.random.default_rng(41)
    X = rng.normal(size=(12, 3))
    y = rng.normal(size=12)
    starts = np.zeros(12, dtype=bool)
    starts[0] = starts[6] = True
    Xw, yw = ar1_whiten(X, y, 0.0, starts)
    np.testing.assert_array_equal(Xw, X)
    np.testing.assert_array_equal(yw, y)


def test_whiten_hand_example():
    # single trajectory y = (1, 1), rho = 0.5
    X = np.ones((2, 1))
    y = np.ones(2)
    starts = np.array([True, False])
    Xw, yw = ar1_whiten(X, y, 0.5, starts)
    np.testing.assert_allclose(yw, [np.sqrt(0.75), 0.5], atol=1e-12)
    np.testing.assert_allclose(Xw[:, 0], [np.sqrt(0.75), 0.5], atol=1e-12)


def test_whitened_ols_equals_explicit_gls():
    rng = np.random.default_rng(43)
    for trial in range(25):
        lengths = rng.integers(2, 9, size=int(rng.integers(1, 5)))
        n = int(lengths.sum())
        if n < 6:
            continue
        p = int(rng.integers(1, min(5, n)))
        X = rng.normal(size=(n, p))
        y = rng.normal(size=n)
        rho = float(rng.uniform(-0.9, 0.9))
        starts = np.zeros(n, dtype=bool)
        pos = 0
        blocks = []
        for ln in lengths:
            starts[pos] = True
            blocks.append(ar1_correlation(int(ln), rho))
            pos += int(ln)
        # oracle: GLS with the explicit block-diagonal correlation matrix
        import scipy.linalg

        C = scipy.linalg.block_diag(*blocks)
        Cinv = np.linalg.inv(C)
        oracle = np.linalg.solve(X.T @ Cinv @ X, X.T @ Cinv @ y)
        Xw, yw = ar1_whiten(X, y, rho, starts)
        ours = np.linalg.lstsq(Xw, yw, rcond=None)[0]
        assert np.abs(ours - oracle).max() < 1e-9, f"trial {trial}"


def test_estimate_rho_white_noise_near_zero():
    rng = np.random.default_rng(47)
    n = 10_000
    r = rng.normal(size=n)
    starts = np.zeros(n, dtype=bool)
    starts[::20] = True
    assert abs(estimate_rho(r, starts)) < 0.05


@pytest.mark.parametrize("rho_true", [0.0, 0.4, 0.8])
def test_estimate_rho_recovers_generator(rho_true):
    rng = np.random.default_rng(53)
    n = 10_000
    starts = np.zeros(n, dtype=bool)
    starts[::25] = True
    r = np.empty(n)
    for i in range(n):
        if starts[i]:
            r[i] = rng.normal()
        else:
            r[i] = rho_true * r[i - 1] + rng.normal(scale=np.sqrt(1 - rho_true**2))
    assert abs(estimate_rho(r, starts) - rho_true) < 0.05


def test_estimate_rho_needs_pairs():
    starts = np.array([True, True])
    with pytest.raises(TooFewResidualPairs):
        estimate_rho(np.array([1.0, 2.0]), starts)


def test_whiten_rejects_unit_rho():
    X = np.ones((3, 1))
    y = np.ones(3)
    starts = np.array([True, False, False])
    with pytest.raises(ValueError):
        ar1_whiten(X, y, 1.0, starts)


# ---------------------------------------------------------------------------
# Model-level fitting and prediction


def _smooth_dataset(n_traj=40, seed=59, rho=0.0):
    rng = np.random.default_rng(seed)
    time = np.tile(np.linspace(0, 1, 21), n_traj)
    start = np.zeros(21 * n_traj, dtype=bool)
    start[::21] = True
    signal = np.sin(np.pi * time)
    noise = np.empty(21 * n_traj)
    for i in range(noise.size):
        if start[i]:
            noise[i] = rng.normal(scale=0.3)
        else:
            noise[i] = rho * noise[i - 1] + rng.normal(scale=0.3 * np.sqrt(1 - rho**2))
    return {"y": signal + noise, "time": time, "start": start}


def test_fit_model_two_stage_recovers_rho():
    data = _smooth_dataset(n_traj=120, rho=0.6)
    spec = ModelSpec("y", (TermSpec(TermKind.SMOOTH, "time", k=5),),
                     ar1="estimate", series_start="start")
    model = fit_model(data, spec)
    assert abs(model.rho - 0.6) < 0.08


def test_predict_intercept_only_is_flat():
    data = _smooth_dataset()
    spec = ModelSpec("y", (TermSpec(TermKind.SMOOTH, "time", k=5),))
    model = fit_model(data, spec)
    grid = {"time": np.linspace(0, 1, 9)}
    curve = predict_with_ci(model, grid, include={"intercept"})
    assert np.ptp(curve.estimate) < 1e-12
    assert np.ptp(curve.se) < 1e-12


def test_predict_full_terms_matches_fitted_values():
    data = _smooth_dataset()
    spec = ModelSpec("y", (TermSpec(TermKind.SMOOTH, "time", k=5),))
    model = fit_model(data, spec)
    curve = predict_with_ci(model, {"time": data["time"][:21]})
    fitted = model.design.X[:21] @ model.coefficients
    np.testing.assert_allclose(curve.estimate, fitted, atol=1e-10)


def test_predict_unknown_term_errors():
    data = _smooth_dataset()
    spec = ModelSpec("y", (TermSpec(TermKind.SMOOTH, "time", k=5),))
    model = fit_model(data, spec)
    with pytest.raises(KeyError):
        predict_with_ci(model, {"time": np.array([0.5])}, include={"s(nope)"})


def test_ci_width_scales_with_noise_sd():
    # doubling the noise variance should widen the se by sqrt(2) within 5%
    base = _smooth_dataset(n_traj=80, seed=61)
    spec = ModelSpec("y", (TermSpec(TermKind.SMOOTH, "time", k=5),))
    rng = np.random.default_rng(67)
    extra = rng.normal(scale=0.3, size=base["y"].size)  # doubles the variance
    noisy = dict(base)
    noisy["y"] = base["y"] + extra
    lam = 1.0
    m1 = fit_reml_on(base, spec, lam)
    m2 = fit_reml_on(noisy, spec, lam)
    grid = {"time": np.linspace(0, 1, 11)}
    se1 = predict_with_ci(m1, grid).se
    se2 = predict_with_ci(m2, grid).se
    ratio = np.median(se2 / se1)
    assert abs(ratio - np.sqrt(2)) < 0.05 * np.sqrt(2)


def fit_reml_on(data, spec, lam):
    design, y = build_design(data, spec)
    fit = fit_reml(design.X, y, design.penalties, fixed_lambda=lam)
    import dataclasses

    return dataclasses.replace(fit, design=design, spec=spec)

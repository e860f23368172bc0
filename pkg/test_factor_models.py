"""
Tests for PCA factors, FA-AR, FAVAR and the two-step DFM
"""

import os
import sys

import numpy as np
import pytest
from statsmodels.stats.diagnostic import acorr_ljungbox

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from forecast_lab.config import FactorGrid
from forecast_lab.errors import DataError, NonPsdCovarianceError, NonStationaryWarning
from forecast_lab.factor_models import (
    DfmModel,
    VarFit,
    companion_matrix,
    dfm_predictive_moments,
    extract_factors_pca,
    fa_ar_design,
    favar_iterate,
    fit_dfm_twostep,
    fit_fa_ar,
    fit_var,
    kalman_filter,
    kalman_filter_forecast,
    select_factor_config,
    var_iterate_mean,
    _initial_covariance,
)


def factor_panel(n=200, k=40, r=2, rho=0.7, noise=0.5, seed=0):
    rng = np.random.default_rng(seed)
    F = np.zeros((n, r))
    for t in range(1, n):
        F[t] = rho * F[t - 1] + rng.standard_normal(r)
    L = rng.standard_normal((k, r))
    X = F @ L.T + noise * rng.standard_normal((n, k))
    X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    return X, F, L


def r_squared(target, regressors):
    Z = np.column_stack([np.ones(len(target)), regressors])
    beta, *_ = np.linalg.lstsq(Z, target, rcond=None)
    resid = target - Z @ beta
    return 1.0 - resid @ resid / np.sum((target - target.mean()) ** 2)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('n,k', [(200, 40), (30, 120)])
def test_pca_spans_true_factors(n, k):
    X, F, _ = factor_panel(n=n, k=k)
    fs = extract_factors_pca(X, 2)
    assert fs.factors.shape == (n, 2)
    for j in range(2):
        assert r_squared(F[:, j], fs.factors) > 0.9
    assert fs.eigenvalues[0] >= fs.eigenvalues[1]


def test_pca_loading_sign_convention():
    X, _, _ = factor_panel()
    fs = extract_factors_pca(X, 3)
    anchors = np.argmax(np.abs(fs.loadings), axis=0)
    assert np.all(fs.loadings[anchors, np.arange(3)] > 0)
    flipped = extract_factors_pca(-X, 3)
    np.testing.assert_allclose(np.abs(flipped.factors), np.abs(fs.factors), atol=1e-8)


def test_pca_rejects_too_many_factors():
    X, _, _ = factor_panel(n=10, k=5)
    with pytest.raises(DataError):
        extract_factors_pca(X, 6)


# ---------------------------------------------------------------------------
# FA-AR
# ---------------------------------------------------------------------------

def test_fa_ar_design_shapes():
    y = np.arange(20.0)
    F = np.arange(40.0).reshape(20, 2)
    X, target, x_oos = fa_ar_design(y, F, p_f=1, horizon=2)
    assert X.shape == (17, 2 + 2 * 2)
    assert target.size == 17
    np.testing.assert_array_equal(X[0], [1.0, 1.0, 2.0, 3.0, 0.0, 1.0])
    assert target[0] == 3.0
    np.testing.assert_array_equal(x_oos, [1.0, 19.0, 38.0, 39.0, 36.0, 37.0])


def test_factor_selection_stays_in_grid():
    X, F, _ = factor_panel(n=150, k=30, r=2)
    rng = np.random.default_rng(3)
    y = np.r_[0.0, F[:-1, 0]] + 0.3 * rng.standard_normal(150)
    grid = FactorGrid(r_max=4, p_f_max=2)
    cfg = select_factor_config(X, y, horizon=1, grid=grid)
    assert 1 <= cfg.r <= 4 and 0 <= cfg.p_f <= 2
    assert np.isfinite(cfg.bic)

    pred = fit_fa_ar(y, extract_factors_pca(X, cfg.r).factors, cfg, 1, 800, np.random.default_rng(4))
    assert pred.draws.size == 800
    assert np.all(np.isfinite(pred.draws))


# ---------------------------------------------------------------------------
# FAVAR
# ---------------------------------------------------------------------------

def simulate_var1(A, c, n=3000, seed=0):
    rng = np.random.default_rng(seed)
    m = A.shape[0]
    Z = np.zeros((n, m))
    for t in range(1, n):
        Z[t] = c + A @ Z[t - 1] + 0.5 * rng.standard_normal(m)
    return Z


def test_var_recovers_coefficients():
    A = np.array([[0.5, 0.1], [0.2, 0.3]])
    c = np.array([0.2, -0.1])
    Z = simulate_var1(A, c)
    fit = fit_var(Z, 1)
    np.testing.assert_allclose(fit.lags[0], A, atol=0.05)
    np.testing.assert_allclose(fit.intercept, c, atol=0.05)
    np.testing.assert_allclose(fit.resid_cov, 0.25 * np.eye(2), atol=0.03)
    assert fit.coefficient_se().shape == (3, 2)


def test_var_matches_equation_by_equation_least_squares():
    A = np.array([[0.4, 0.1], [-0.2, 0.3]])
    Z = simulate_var1(A, np.array([0.1, 0.3]), n=150, seed=3)
    fit = fit_var(Z, 2)
    n = Z.shape[0]
    W = np.column_stack([np.ones(n - 2), Z[1:n - 1], Z[0:n - 2]])
    B, *_ = np.linalg.lstsq(W, Z[2:], rcond=None)
    np.testing.assert_allclose(fit.intercept, B[0], atol=1e-8)
    np.testing.assert_allclose(fit.lags[0], B[1:3].T, atol=1e-8)
    np.testing.assert_allclose(fit.lags[1], B[3:5].T, atol=1e-8)
    E = Z[2:] - W @ B
    np.testing.assert_allclose(fit.resid_cov, E.T @ E / (n - 2 - 5), atol=1e-8)
    se = np.sqrt(np.outer(np.diag(np.linalg.inv(W.T @ W)), np.diag(fit.resid_cov)))
    np.testing.assert_allclose(fit.coefficient_se(), se, rtol=1e-6)


def test_var_needs_two_series():
    with pytest.raises(DataError):
        fit_var(np.random.default_rng(0).standard_normal((50, 1)), 1)


def test_companion_matrix_layout():
    lags = np.stack([np.eye(2) * 0.5, np.eye(2) * 0.2])
    fit = VarFit(intercept=np.zeros(2), lags=lags, resid_cov=np.eye(2), lag_order=2)
    C = companion_matrix(fit)
    assert C.shape == (4, 4)
    np.testing.assert_allclose(C[:2, :2], 0.5 * np.eye(2))
    np.testing.assert_allclose(C[:2, 2:], 0.2 * np.eye(2))
    np.testing.assert_allclose(C[2:, :2], np.eye(2))


def test_var_iterate_mean_matches_recursion():
    A = np.array([[0.5, 0.1], [0.0, 0.8]])
    fit = VarFit(intercept=np.array([1.0, 0.0]), lags=A[None], resid_cov=np.zeros((2, 2)), lag_order=1)
    z = np.array([1.0, 2.0])
    expected = z.copy()
    for _ in range(3):
        expected = fit.intercept + A @ expected
    np.testing.assert_allclose(var_iterate_mean(fit, z[None], 3), expected)

    pred = favar_iterate(fit, z[None], 3, 600, np.random.default_rng(0), target_index=0)
    np.testing.assert_allclose(pred.draws, expected[0])


def test_favar_one_step_variance():
    A = np.array([[0.3]])
    fit = VarFit(intercept=np.array([0.0]), lags=A[None], resid_cov=np.array([[4.0]]), lag_order=1)
    pred = favar_iterate(fit, np.array([[1.0]]), 1, 40_000, np.random.default_rng(1))
    assert pred.mean == pytest.approx(0.3, abs=0.05)
    assert pred.draws.var() == pytest.approx(4.0, rel=0.05)


def test_favar_two_step_variance_accumulates():
    A = np.array([[0.5]])
    fit = VarFit(intercept=np.array([0.0]), lags=A[None], resid_cov=np.array([[1.0]]), lag_order=1)
    pred = favar_iterate(fit, np.array([[0.0]]), 2, 40_000, np.random.default_rng(2))
    assert pred.draws.var() == pytest.approx(1.25, rel=0.05)


def test_favar_rejects_indefinite_covariance():
    fit = VarFit(intercept=np.zeros(2), lags=np.zeros((1, 2, 2)),
                 resid_cov=np.array([[1.0, 0.0], [0.0, -1.0]]), lag_order=1)
    with pytest.raises(NonPsdCovarianceError):
        favar_iterate(fit, np.zeros((1, 2)), 1, 600, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# DFM
# ---------------------------------------------------------------------------

def test_dfm_filter_tracks_factors():
    X, F, _ = factor_panel(n=200, k=40, r=2, noise=0.3)
    model = fit_dfm_twostep(X, 2)
    assert model.spectral_radius < 1.0
    result = kalman_filter(model, X)
    assert result.filtered_states.shape == (200, 2)
    for j in range(2):
        assert r_squared(F[:, j], result.filtered_states) > 0.9


def test_dfm_predictive_moments():
    X, F, _ = factor_panel(n=200, k=30, r=1, rho=0.8, noise=0.3, seed=4)
    rng = np.random.default_rng(5)
    y = 1.5 * F[:, 0] + 0.3 * rng.standard_normal(200)
    model = fit_dfm_twostep(X, 1, y=y)
    mean1, var1 = dfm_predictive_moments(model, X, 1)
    mean6, var6 = dfm_predictive_moments(model, X, 6)
    assert var1 > model.y_obs_var
    assert var6 > var1
    # long horizons revert toward the target's mean
    assert abs(mean6 - y.mean()) < abs(mean1 - y.mean()) + 1e-9

    pred = kalman_filter_forecast(model, X, 1, 20_000, np.random.default_rng(6))
    assert pred.mean == pytest.approx(mean1, abs=0.05 * np.sqrt(var1))
    assert pred.draws.var() == pytest.approx(var1, rel=0.05)


def test_nonstationary_transition_warns_and_uses_identity_prior():
    model = DfmModel(Lambda=np.ones((3, 1)), Phi=np.array([[1.2]]), Q=np.array([[1.0]]),
                     R_diag=np.ones(3), y_loading=np.array([1.0]))
    np.testing.assert_allclose(_initial_covariance(model), np.eye(1))
    X = np.random.default_rng(0).standard_normal((20, 3))
    with pytest.warns(NonStationaryWarning):
        kalman_filter_forecast(model, X, 2, 600, np.random.default_rng(1))


def test_stationary_initial_covariance_solves_lyapunov():
    Phi = np.array([[0.5, 0.1], [0.0, 0.4]])
    Q = np.eye(2)
    model = DfmModel(Lambda=np.ones((3, 2)), Phi=Phi, Q=Q, R_diag=np.ones(3), y_loading=np.zeros(2))
    P0 = _initial_covariance(model)
    np.testing.assert_allclose(P0, Phi @ P0 @ Phi.T + Q, atol=1e-10)


def simulate_dfm(model, n, seed):
    rng = np.random.default_rng(seed)
    r, k = model.r, model.Lambda.shape[0]
    f = rng.multivariate_normal(np.zeros(r), _initial_covariance(model))
    X = np.zeros((n, k))
    for t in range(n):
        if t > 0:
            f = model.Phi @ f + rng.multivariate_normal(np.zeros(r), model.Q)
        X[t] = model.Lambda @ f + np.sqrt(model.R_diag) * rng.standard_normal(k)
    return X


def test_filter_innovations_are_white_under_the_true_model():
    k = 6
    model = DfmModel(Lambda=np.linspace(0.6, 1.4, k)[:, None], Phi=np.array([[0.8]]),
                     Q=np.array([[0.36]]), R_diag=np.full(k, 0.5), y_loading=np.zeros(1))
    passes = []
    for seed in range(10):
        X = simulate_dfm(model, 600, seed)
        innovations = kalman_filter(model, X).innovations
        for series in (0, k - 1):
            p = float(acorr_ljungbox(innovations[:, series], lags=[10])['lb_pvalue'].iloc[0])
            passes.append(p > 0.01)
    assert np.mean(passes) >= 0.9


def test_twostep_transition_near_truth():
    X, _, _ = factor_panel(n=300, k=40, r=1, rho=0.8, noise=0.5, seed=11)
    model = fit_dfm_twostep(X, 1)
    assert 0.7 <= model.Phi[0, 0] <= 0.9

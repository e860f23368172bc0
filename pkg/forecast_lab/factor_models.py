"""
Factor Models Module
PCA factors, factor-augmented AR, FAVAR iteration and the two-step
dynamic factor model with Kalman filtering
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_discrete_lyapunov
from sklearn.decomposition import PCA
from sklearn.linear_model import LinearRegression
from statsmodels.tsa.api import VAR

from .config import FactorGrid
from .direct_models import PredictiveDraws, ar_predictive, fit_flat_regression
from .errors import (
    DataError,
    InsufficientDataError,
    NonPsdCovarianceError,
    NonStationaryWarning,
    NumericalError,
    SingularDesignError,
)
from .mcmc import as_generator

PSD_TOLERANCE = 1e-10
R_DIAG_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class FactorSet:
    factors: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    r: int


@dataclass(frozen=True)
class FactorConfig:
    r: int
    p_f: int
    r_max: int = 8
    p_f_max: int = 3
    bic: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if not (1 <= self.r <= self.r_max and 0 <= self.p_f <= self.p_f_max):
            raise ValueError(f"(r={self.r}, p_f={self.p_f}) outside the search grid")


@dataclass(frozen=True, eq=False)
class VarFit:
    intercept: np.ndarray
    lags: np.ndarray
    resid_cov: np.ndarray
    lag_order: int
    coef_se: Optional[np.ndarray] = field(repr=False, default=None)

    @property
    def m(self) -> int:
        return self.intercept.size

    def coefficient_se(self) -> np.ndarray:
        """Standard errors laid out like the stacked (1 + m q) x m coefficient matrix"""
        if self.coef_se is None:
            raise NumericalError("VAR fit carries no coefficient standard errors")
        return self.coef_se


@dataclass(frozen=True, eq=False)
class DfmModel:
    Lambda: np.ndarray
    Phi: np.ndarray
    Q: np.ndarray
    R_diag: np.ndarray
    y_loading: np.ndarray
    y_intercept: float = 0.0
    y_obs_var: float = 0.0
    x_mean: Optional[np.ndarray] = field(repr=False, default=None)

    @property
    def r(self) -> int:
        return self.Phi.shape[0]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.Phi))))


@dataclass(frozen=True, eq=False)
class KalmanResult:
    filtered_states: np.ndarray
    filtered_covs: np.ndarray
    innovations: np.ndarray


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

def extract_factors_pca(X, r: int) -> FactorSet:
    """
    Leading r principal-component scores of a standardized panel

    Each loading column is signed so that its largest-magnitude entry is
    positive.
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if n < 2:
        raise InsufficientDataError("PCA needs at least two rows")
    if r < 1 or r > min(n, k):
        raise DataError(f"Cannot extract {r} factors from a {n} x {k} panel")
    Xc = X - X.mean(axis=0)

    pca = PCA(n_components=r, svd_solver='full').fit(Xc)
    loadings = pca.components_.T.copy()
    eigenvalues = np.clip(pca.explained_variance_, 0.0, None)

    anchors = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[anchors, np.arange(r)])
    signs[signs == 0] = 1.0
    loadings = loadings * signs
    return FactorSet(factors=Xc @ loadings, loadings=loadings, eigenvalues=eigenvalues, r=r)


# ---------------------------------------------------------------------------
# FA-AR
# ---------------------------------------------------------------------------

def fa_ar_design(y, factors, p_f: int, horizon: int, start: Optional[int] = None):
    """
    Rows [1, y_t, f_t', ..., f_{t-p_f}'] against y_{t+h}

    Returns:
        (X, target, x_oos) where x_oos is the regressor row at the last date
    """
    y = np.asarray(y, dtype=float)
    F = np.asarray(factors, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    m = y.size
    if F.shape[0] != m:
        raise DataError("Target and factors must have the same number of rows")
    start = p_f if start is None else max(start, p_f)

    def row(t):
        lagged = [F[t - lag] for lag in range(p_f + 1)]
        return np.concatenate([[1.0, y[t]], *lagged])

    rows = [row(t) for t in range(start, m - horizon)]
    width = 2 + F.shape[1] * (p_f + 1)
    X = np.array(rows).reshape(-1, width)
    target = y[start + horizon:]
    return X, target, row(m - 1)


def _bic(X, target):
    n, k = X.shape
    beta = LinearRegression(fit_intercept=False).fit(X, target).coef_
    resid = target - X @ beta
    sse = max(float(resid @ resid), np.finfo(float).tiny)
    return n * np.log(sse / n) + k * np.log(n)


def select_factor_config(X, y_target, horizon: int, grid: FactorGrid = FactorGrid()) -> FactorConfig:
    """BIC over the (r, p_f) grid on a common estimation sample"""
    candidates = grid.candidates()
    if not candidates:
        raise ValueError("Factor grid is empty")
    X = np.asarray(X, dtype=float)
    r_cap = min(grid.r_max, X.shape[0] - 1, X.shape[1])
    if r_cap < 1:
        raise InsufficientDataError("Panel too small for factor extraction")
    fs = extract_factors_pca(X, r_cap)

    best = None
    for r, p_f in candidates:
        if r > r_cap:
            continue
        design, target, _ = fa_ar_design(y_target, fs.factors[:, :r], p_f, horizon, start=grid.p_f_max)
        if design.shape[0] <= design.shape[1] or np.linalg.matrix_rank(design) < design.shape[1]:
            continue
        bic = _bic(design, target)
        if best is None or bic < best[0]:
            best = (bic, r, p_f)

    if best is None:
        raise InsufficientDataError("No factor configuration could be fitted")
    return FactorConfig(r=best[1], p_f=best[2], r_max=grid.r_max, p_f_max=grid.p_f_max, bic=best[0])


def fit_fa_ar(y, factors, config: FactorConfig, horizon: int, n_draws: int, rng,
              origin_date=None, model_tag='fa_ar') -> PredictiveDraws:
    """Flat-prior FA-AR with Student-t predictive"""
    F = np.asarray(factors, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    X, target, x_oos = fa_ar_design(y, F[:, :config.r], config.p_f, horizon)
    post = fit_flat_regression(X, target)
    return ar_predictive(post, x_oos, n_draws, rng, origin_date=origin_date, horizon=horizon,
                         model_tag=model_tag)


# ---------------------------------------------------------------------------
# FAVAR
# ---------------------------------------------------------------------------

def fit_var(Z, q: int) -> VarFit:
    """Least-squares VAR(q) with intercept, fitted by statsmodels"""
    if q < 1:
        raise ValueError("A VAR needs at least one lag")
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, m = Z.shape
    if m < 2:
        raise DataError("A VAR needs at least two series")
    ncoef = m * q + 1
    n_eff = n - q
    if n_eff <= ncoef:
        raise InsufficientDataError(f"{n_eff} usable rows for {ncoef} coefficients per equation")

    W = np.hstack([np.ones((n_eff, 1))] + [Z[q - lag:n - lag] for lag in range(1, q + 1)])
    if np.linalg.matrix_rank(W) < ncoef:
        raise SingularDesignError("VAR design is rank deficient")
    res = VAR(Z).fit(q, trend='c')
    resid_cov = np.asarray(res.sigma_u, dtype=float)
    return VarFit(intercept=np.asarray(res.intercept, dtype=float).copy(),
                  lags=np.asarray(res.coefs, dtype=float).copy(),
                  resid_cov=0.5 * (resid_cov + resid_cov.T), lag_order=q,
                  coef_se=np.asarray(res.stderr, dtype=float))


def companion_matrix(fit: VarFit) -> np.ndarray:
    m, q = fit.m, fit.lag_order
    top = np.hstack(list(fit.lags))
    if q == 1:
        return top
    bottom = np.hstack([np.eye(m * (q - 1)), np.zeros((m * (q - 1), m))])
    return np.vstack([top, bottom])


def _step(fit: VarFit, history):
    """One deterministic step; history[..., -1, :] is the latest row"""
    out = np.broadcast_to(fit.intercept, history.shape[:-2] + (fit.m,)).copy()
    for lag in range(fit.lag_order):
        out += history[..., -1 - lag, :] @ fit.lags[lag].T
    return out


def var_iterate_mean(fit: VarFit, last_state, h: int) -> np.ndarray:
    """Deterministic h-step iterate from the q most recent rows"""
    history = np.asarray(last_state, dtype=float).reshape(fit.lag_order, fit.m)
    for _ in range(h):
        z = _step(fit, history)
        history = np.vstack([history[1:], z])
    return history[-1]


def _covariance_root(cov):
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    scale = max(1.0, float(np.max(np.abs(vals))))
    if vals.min() < -PSD_TOLERANCE * scale:
        raise NonPsdCovarianceError("Residual covariance is not positive semi-definite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def favar_iterate(fit: VarFit, last_state, h: int, n_sims: int, rng, target_index: int = -1,
                  origin_date=None, horizon=None, model_tag='favar') -> PredictiveDraws:
    """
    Simulate n_sims VAR paths h steps ahead with Gaussian innovations

    Coefficients stay at their point estimates; the target component of the
    final step forms the predictive draws.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    gen = as_generator(rng)
    root = _covariance_root(fit.resid_cov)
    state = np.asarray(last_state, dtype=float).reshape(fit.lag_order, fit.m)
    paths = np.broadcast_to(state, (n_sims, fit.lag_order, fit.m)).copy()
    for _ in range(h):
        shocks = gen.standard_normal((n_sims, fit.m)) @ root.T
        z = _step(fit, paths) + shocks
        paths = np.concatenate([paths[:, 1:, :], z[:, None, :]], axis=1)
    return PredictiveDraws(draws=paths[:, -1, target_index], origin_date=origin_date,
                           horizon=horizon if horizon is not None else h, model_tag=model_tag)


# ---------------------------------------------------------------------------
# Dynamic factor model
# ---------------------------------------------------------------------------

def fit_dfm_twostep(X, r: int, y=None) -> DfmModel:
    """
    Two-step DFM: PCA factors, loadings by regression, VAR(1) transition

    The target is a separate measurement regressed on the factors.
    """
    X = np.asarray(X, dtype=float)
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    F = extract_factors_pca(Xc, r).factors
    if np.linalg.matrix_rank(F) < r:
        raise SingularDesignError("Factor regressors are rank deficient")

    Lambda = LinearRegression(fit_intercept=False).fit(F, Xc).coef_.reshape(X.shape[1], r)
    resid = Xc - F @ Lambda.T
    col_var = np.maximum(Xc.var(axis=0), 1.0)
    R_diag = np.maximum(resid.var(axis=0), R_DIAG_FLOOR * col_var)

    transition = LinearRegression(fit_intercept=False).fit(F[:-1], F[1:])
    Phi = transition.coef_.reshape(r, r)
    U = F[1:] - F[:-1] @ Phi.T
    Q = U.T @ U / max(U.shape[0] - r, 1)

    if y is None:
        y_loading, y_intercept, y_obs_var = np.zeros(r), 0.0, 0.0
    else:
        y = np.asarray(y, dtype=float)
        if y.size != X.shape[0]:
            raise DataError("Target and panel rows differ")
        measurement = LinearRegression().fit(F, y)
        y_loading = measurement.coef_.reshape(r)
        y_intercept = float(measurement.intercept_)
        e = y - measurement.predict(F)
        y_obs_var = float(e @ e / max(y.size - r - 1, 1))

    model = DfmModel(Lambda=Lambda, Phi=Phi, Q=0.5 * (Q + Q.T), R_diag=R_diag,
                     y_loading=y_loading, y_intercept=y_intercept, y_obs_var=y_obs_var,
                     x_mean=x_mean)
    if model.spectral_radius >= 1.0:
        warnings.warn(f"Estimated factor transition has spectral radius {model.spectral_radius:.3f}",
                      NonStationaryWarning, stacklevel=2)
    return model


def _initial_covariance(model: DfmModel):
    r = model.r
    if model.spectral_radius < 1.0:
        P0 = solve_discrete_lyapunov(model.Phi, model.Q)
        P0 = 0.5 * (P0 + P0.T)
        if np.all(np.isfinite(P0)) and np.linalg.eigvalsh(P0).min() > 1e-12:
            return P0
    return np.eye(r)


def kalman_filter(model: DfmModel, X_window) -> KalmanResult:
    """
    Filter the factors through X_t = Lambda f_t + e_t, f_t = Phi f_{t-1} + u_t

    The update works in r dimensions using the diagonal measurement noise,
    so wide panels cost O(k r^2) per step.
    """
    X = np.asarray(X_window, dtype=float)
    if model.x_mean is not None:
        X = X - model.x_mean
    n, k = X.shape
    r = model.r
    Lam = model.Lambda
    LtRinv = Lam.T / model.R_diag
    M = LtRinv @ Lam
    eye = np.eye(r)

    f_pred = np.zeros(r)
    P_pred = _initial_covariance(model)
    states = np.empty((n, r))
    covs = np.empty((n, r, r))
    innovations = np.empty((n, k))

    for t in range(n):
        v = X[t] - Lam @ f_pred
        S = eye + P_pred @ M
        SinvP = np.linalg.solve(S, P_pred)
        f_filt = f_pred + SinvP @ (LtRinv @ v)
        P_filt = P_pred - SinvP @ M @ P_pred
        P_filt = 0.5 * (P_filt + P_filt.T)
        if not (np.all(np.isfinite(f_filt)) and np.all(np.isfinite(P_filt))):
            raise NumericalError(f"Kalman recursion became non-finite at step {t}")
        states[t], covs[t], innovations[t] = f_filt, P_filt, v
        f_pred = model.Phi @ f_filt
        P_pred = model.Phi @ P_filt @ model.Phi.T + model.Q

    return KalmanResult(filtered_states=states, filtered_covs=covs, innovations=innovations)


def dfm_predictive_moments(model: DfmModel, X_window, h: int):
    """Mean and variance of the Gaussian predictive for y_{T+h}"""
    if h < 1:
        raise ValueError("h must be >= 1")
    result = kalman_filter(model, X_window)
    f = result.filtered_states[-1]
    P = result.filtered_covs[-1]
    for _ in range(h):
        f = model.Phi @ f
        P = model.Phi @ P @ model.Phi.T + model.Q
    mean = model.y_intercept + float(model.y_loading @ f)
    var = float(model.y_loading @ P @ model.y_loading) + model.y_obs_var
    if not (np.isfinite(mean) and np.isfinite(var)):
        raise NumericalError("Non-finite covariance propagation")
    return mean, max(var, 0.0)


def kalman_filter_forecast(model: DfmModel, X_window, h: int, n_draws: int, rng,
                           origin_date=None, model_tag='dfm') -> PredictiveDraws:
    """Gaussian DFM predictive for y_{T+h}, sampled into draws"""
    if model.spectral_radius >= 1.0:
        warnings.warn(f"Forecasting with spectral radius {model.spectral_radius:.3f}",
                      NonStationaryWarning, stacklevel=2)
    mean, var = dfm_predictive_moments(model, X_window, h)
    gen = as_generator(rng)
    draws = mean + np.sqrt(var) * gen.standard_normal(n_draws)
    return PredictiveDraws(draws=draws, origin_date=origin_date, horizon=h, model_tag=model_tag)

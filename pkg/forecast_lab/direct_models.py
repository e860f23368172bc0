"""
Direct Models Module
Flat-prior AR(p) baseline and the high-dimensional horseshoe direct regression
"""

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.linear_model import LinearRegression

from .config import DEFAULT_TOP_K, MIN_PREDICTIVE_DRAWS, HsChainConfig
from .diagnostics import KappaSummary, kappa_from_draws, top_k
from .errors import (
    InsufficientDataError,
    LowDegreesOfFreedomWarning,
    SingularDesignError,
    TopKTruncatedWarning,
)
from .mcmc import as_generator, chain_report, run_hs_chain


@dataclass(frozen=True, eq=False)
class ArFlatPosterior:
    beta_hat: np.ndarray
    xtx_inv: np.ndarray
    sse: float
    n: int
    k: int

    @property
    def dof(self) -> int:
        return self.n - self.k

    @property
    def sigma2_hat(self) -> float:
        return self.sse / self.dof if self.dof > 0 else float('nan')


@dataclass(frozen=True, eq=False)
class PredictiveDraws:
    draws: np.ndarray
    origin_date: object = None
    horizon: Optional[int] = None
    model_tag: str = ''
    mean: float = field(init=False)

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float).ravel()
        if draws.size < MIN_PREDICTIVE_DRAWS:
            raise ValueError(f"Predictive sample has {draws.size} draws; need {MIN_PREDICTIVE_DRAWS}")
        if not np.all(np.isfinite(draws)):
            raise ValueError("Predictive draws must be finite")
        object.__setattr__(self, 'draws', draws)
        object.__setattr__(self, 'mean', float(draws.mean()))

    @property
    def n_draws(self) -> int:
        return self.draws.size


@dataclass(frozen=True, eq=False)
class HsForecastOutput:
    predictive: PredictiveDraws
    keep_mean: np.ndarray
    top_k: List[Tuple[str, float]]
    summary: KappaSummary = field(repr=False, default=None)
    chain_diagnostics: Dict[str, dict] = field(default_factory=dict)
    top_k_truncated: bool = False


# ---------------------------------------------------------------------------
# Flat-prior regression
# ---------------------------------------------------------------------------

def fit_flat_regression(X, y) -> ArFlatPosterior:
    """Conjugate flat-prior posterior: OLS coefficients, (X'X)^-1 and SSE"""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n <= k:
        raise InsufficientDataError(f"{n} observations for {k} coefficients")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InsufficientDataError("Regression inputs contain missing values")
    if np.linalg.matrix_rank(X) < k:
        raise SingularDesignError("Regression design is rank deficient")

    beta_hat = LinearRegression(fit_intercept=False).fit(X, y).coef_
    try:
        factor = cho_factor(X.T @ X, lower=True)
    except LinAlgError as exc:
        raise SingularDesignError("X'X is not positive definite") from exc
    xtx_inv = cho_solve(factor, np.eye(k))
    xtx_inv = 0.5 * (xtx_inv + xtx_inv.T)
    resid = y - X @ beta_hat
    return ArFlatPosterior(beta_hat=beta_hat, xtx_inv=xtx_inv, sse=float(max(resid @ resid, 0.0)),
                           n=n, k=k)


def ar_design(y_history, p: int, horizon: int):
    """Rows [1, y_t, ..., y_{t-p+1}] against y_{t+h}"""
    y = np.asarray(y_history, dtype=float)
    if p < 0 or horizon < 1:
        raise ValueError("p must be >= 0 and horizon >= 1")
    start = max(p - 1, 0)
    stop = y.size - horizon
    rows = [np.concatenate([[1.0], y[t - np.arange(p)]]) for t in range(start, stop)]
    X = np.array(rows).reshape(-1, p + 1)
    target = y[start + horizon:]
    return X, target


def ar_regressor(y_history, p: int) -> np.ndarray:
    """[1, y_T, ..., y_{T-p+1}] from the end of the history"""
    y = np.asarray(y_history, dtype=float)
    return np.concatenate([[1.0], y[::-1][:p]])


def fit_ar_flat(y_history, p: int = 2, horizon: int = 1) -> ArFlatPosterior:
    """
    Direct AR(p) with flat prior on beta and Jeffreys prior on sigma^2

    Args:
        y_history: target history in transformed units
        p (int): autoregressive order
        horizon (int): forecast horizon h

    Returns:
        ArFlatPosterior
    """
    X, target = ar_design(y_history, p, horizon)
    if X.shape[0] <= p + 1:
        raise InsufficientDataError(f"{X.shape[0]} usable pairs for an AR({p}) at horizon {horizon}")
    return fit_flat_regression(X, target)


def ar_predictive_distribution(post: ArFlatPosterior, x_oos):
    """Analytic Student-t predictive (scipy frozen distribution)"""
    x = np.asarray(x_oos, dtype=float)
    loc = float(x @ post.beta_hat)
    scale2 = post.sigma2_hat * (1.0 + float(x @ post.xtx_inv @ x))
    return stats.t(df=post.dof, loc=loc, scale=np.sqrt(scale2))


def ar_predictive(post: ArFlatPosterior, x_oos, n_draws: int, rng,
                  origin_date=None, horizon=None, model_tag='ar2') -> PredictiveDraws:
    """Sample the Student-t predictive with n-k dof"""
    if post.dof < 1:
        raise InsufficientDataError(f"Predictive needs at least one degree of freedom, got {post.dof}")
    if post.dof < 3:
        warnings.warn(f"Student-t predictive with {post.dof} dof has infinite variance",
                      LowDegreesOfFreedomWarning, stacklevel=2)
    gen = as_generator(rng)
    x = np.asarray(x_oos, dtype=float)
    loc = float(x @ post.beta_hat)
    scale2 = post.sigma2_hat * (1.0 + float(x @ post.xtx_inv @ x))
    draws = loc + np.sqrt(max(scale2, 0.0)) * gen.standard_t(post.dof, size=n_draws)
    return PredictiveDraws(draws=draws, origin_date=origin_date, horizon=horizon, model_tag=model_tag)


# ---------------------------------------------------------------------------
# Horseshoe direct regression
# ---------------------------------------------------------------------------

def hs_direct_forecast(design, x_oos, config: HsChainConfig, rng, K: int = DEFAULT_TOP_K,
                       model_tag='hs') -> HsForecastOutput:
    """
    Horseshoe regression of y_{t+h} on the standardized panel

    The target is centred on its training mean before sampling and the mean
    is added back to every predictive draw y = ybar + x_oos'beta + sigma * eps.
    """
    gen = as_generator(rng)
    x = np.asarray(x_oos, dtype=float)
    if x.shape != (design.k,):
        raise ValueError(f"x_oos has {x.size} entries for {design.k} predictors")

    y_bar = float(np.mean(design.y))
    draws = run_hs_chain(design.X, design.y - y_bar, config, gen)
    eps = gen.standard_normal(draws.n_draws)
    pred = y_bar + draws.beta_draws @ x + np.sqrt(draws.sigma2_draws) * eps

    v = np.maximum(np.sum(design.X ** 2, axis=0), 1e-12)
    summary = kappa_from_draws(draws, v, predictor_ids=design.predictor_ids,
                               origin_date=design.origin_date, horizon=design.horizon)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always', TopKTruncatedWarning)
        ranked = top_k(summary, K)
    truncated = any(issubclass(w.category, TopKTruncatedWarning) for w in caught)

    predictive = PredictiveDraws(draws=pred, origin_date=design.origin_date,
                                 horizon=design.horizon, model_tag=model_tag)
    return HsForecastOutput(predictive=predictive, keep_mean=summary.keep_mean, top_k=ranked,
                            summary=summary, chain_diagnostics=chain_report(draws, pred),
                            top_k_truncated=truncated)

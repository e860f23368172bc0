"""
MCMC Core Module
RNG streams, inverse-gamma sampling, the fast Gaussian beta draw,
horseshoe Gibbs sweeps, chain running and convergence diagnostics
"""

import zlib
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .config import HsChainConfig
from .errors import NumericalSingularityError, SweepError
from .timeseries import autocorrelation, long_run_variance, newey_west_lags

JITTER_LADDER = (1e-12, 1e-8, 1e-6)
MIN_DIAGNOSTIC_LENGTH = 100
GEWEKE_FIRST = 0.10
GEWEKE_LAST = 0.50


def model_tag_code(tag: str) -> int:
    """Stable integer code for a model tag"""
    return zlib.crc32(tag.encode('utf-8'))


@dataclass(frozen=True)
class RngStream:
    """Random stream keyed by (horizon, origin index, model tag)"""

    seed: int
    stream_key: Tuple[int, int, str]

    def seed_sequence(self) -> np.random.SeedSequence:
        horizon, origin_index, tag = self.stream_key
        return np.random.SeedSequence(
            entropy=int(self.seed),
            spawn_key=(int(horizon), int(origin_index), model_tag_code(str(tag))),
        )

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))


def as_generator(rng: Union[RngStream, np.random.Generator, int, None]) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class HsState:
    beta: np.ndarray
    sigma2: float
    tau2: float
    lambda2: np.ndarray
    nu: np.ndarray
    xi: float

    @classmethod
    def initial(cls, k: int) -> 'HsState':
        return cls(beta=np.zeros(k), sigma2=1.0, tau2=1.0, lambda2=np.ones(k),
                   nu=np.ones(k), xi=1.0)

    def is_valid(self) -> bool:
        scales = np.concatenate([[self.sigma2, self.tau2, self.xi], self.lambda2, self.nu])
        return bool(np.all(np.isfinite(scales)) and np.all(scales > 0)
                    and np.all(np.isfinite(self.beta)))


@dataclass(frozen=True)
class HsDraws:
    beta_draws: np.ndarray
    sigma2_draws: np.ndarray
    tau2_draws: np.ndarray
    lambda2_draws: np.ndarray

    @property
    def n_draws(self) -> int:
        return self.sigma2_draws.size

    @property
    def k(self) -> int:
        return self.beta_draws.shape[1]


class ChainDiagnostics(NamedTuple):
    geweke_z: float
    ess: float
    degenerate: bool = False


# ---------------------------------------------------------------------------
# Elementary samplers
# ---------------------------------------------------------------------------

def sample_inverse_gamma(shape, rate, rng, size=None):
    """
    Inverse-gamma draw with density proportional to x^(-shape-1) exp(-rate/x)

    Args:
        shape: positive scalar or array
        rate: positive scalar or array
        rng: np.random.Generator or RngStream
        size: output shape (defaults to the broadcast of shape and rate)

    Returns:
        float or ndarray of positive draws
    """
    shape_arr = np.asarray(shape, dtype=float)
    rate_arr = np.asarray(rate, dtype=float)
    if not (np.all(np.isfinite(shape_arr)) and np.all(shape_arr > 0)):
        raise ValueError(f"Inverse-gamma shape must be positive, got {shape}")
    if not (np.all(np.isfinite(rate_arr)) and np.all(rate_arr > 0)):
        raise ValueError(f"Inverse-gamma rate must be positive, got {rate}")
    gen = as_generator(rng)
    if size is None:
        size = np.broadcast(shape_arr, rate_arr).shape
    if np.all(shape_arr == 1.0):
        gamma = gen.standard_exponential(size)
    else:
        gamma = gen.standard_gamma(shape_arr, size)
    out = rate_arr / np.asarray(gamma)
    return float(out) if out.ndim == 0 else out


def _cholesky_with_jitter(A):
    try:
        return cho_factor(A, lower=True)
    except (LinAlgError, ValueError):
        pass
    scale = float(np.mean(np.diag(A)))
    if not np.isfinite(scale) or scale <= 0:
        raise NumericalSingularityError("System matrix has a non-positive or non-finite diagonal")
    eye = np.eye(A.shape[0])
    for eps in JITTER_LADDER:
        try:
            return cho_factor(A + eps * scale * eye, lower=True)
        except (LinAlgError, ValueError):
            continue
    raise NumericalSingularityError("Cholesky factorization failed after jitter escalation")


def fast_beta_draw(X, y, sigma2, D, rng):
    """
    Exact draw from N(mu, Sigma), Sigma = (X'X/sigma2 + D^-1)^-1

    Only the n x n system A = X D X' + sigma2 I is factorized, so the cost
    is driven by n when k >> n.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    D = np.asarray(D, dtype=float)
    n, k = X.shape
    if D.shape != (k,) or y.shape != (n,):
        raise ValueError("Dimension mismatch between X, y and D")
    if np.any(D <= 0):
        raise ValueError("Prior variances must be positive")
    gen = as_generator(rng)

    u = np.sqrt(D) * gen.standard_normal(k)
    delta = np.sqrt(sigma2) * gen.standard_normal(n)
    v = X @ u + delta
    XD = X * D
    A = XD @ X.T
    A[np.diag_indices(n)] += sigma2
    w = cho_solve(_cholesky_with_jitter(A), y - v)
    return u + XD.T @ w


# ---------------------------------------------------------------------------
# Horseshoe conditionals: each returns (shape, rate)
# ---------------------------------------------------------------------------

def sigma2_conditional(residual, beta, tau2, lambda2, a_sigma=0.0, b_sigma=0.0):
    n, k = residual.size, beta.size
    quad = np.sum(beta ** 2 / (tau2 * lambda2))
    return (n + k) / 2.0 + a_sigma, 0.5 * (residual @ residual + quad) + b_sigma


def local_scale_conditional(beta, sigma2, tau2, nu):
    return 1.0, 1.0 / nu + beta ** 2 / (2.0 * sigma2 * tau2)


def local_aux_conditional(lambda2):
    return 1.0, 1.0 + 1.0 / lambda2


def global_scale_conditional(beta, sigma2, lambda2, xi):
    k = beta.size
    return (k + 1) / 2.0, 1.0 / xi + np.sum(beta ** 2 / lambda2) / (2.0 * sigma2)


def global_aux_conditional(tau2):
    return 1.0, 1.0 + 1.0 / tau2


def _ig_step(step, params, gen):
    shape, rate = params
    try:
        draw = sample_inverse_gamma(shape, rate, gen)
    except ValueError as exc:
        raise SweepError(step, f"Gibbs step '{step}': {exc}") from exc
    if not np.all(np.isfinite(draw)) or np.any(np.asarray(draw) <= 0):
        raise SweepError(step)
    return draw


def hs_gibbs_sweep(state: HsState, X, y, config: HsChainConfig, rng) -> HsState:
    """One horseshoe Gibbs sweep: beta, sigma2, lambda2, nu, tau2, xi in that order"""
    gen = as_generator(rng)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)

    D = state.sigma2 * state.tau2 * state.lambda2
    try:
        beta = fast_beta_draw(X, y, state.sigma2, D, gen)
    except ValueError as exc:
        raise SweepError('beta', f"Gibbs step 'beta': {exc}") from exc
    if not np.all(np.isfinite(beta)):
        raise SweepError('beta')

    residual = y - X @ beta
    sigma2 = _ig_step('sigma2', sigma2_conditional(
        residual, beta, state.tau2, state.lambda2, config.a_sigma, config.b_sigma), gen)
    lambda2 = _ig_step('lambda2', local_scale_conditional(beta, sigma2, state.tau2, state.nu), gen)
    nu = _ig_step('nu', local_aux_conditional(lambda2), gen)
    tau2 = _ig_step('tau2', global_scale_conditional(beta, sigma2, lambda2, state.xi), gen)
    xi = _ig_step('xi', global_aux_conditional(tau2), gen)

    return HsState(beta=beta, sigma2=float(sigma2), tau2=float(tau2),
                   lambda2=np.asarray(lambda2, dtype=float), nu=np.asarray(nu, dtype=float),
                   xi=float(xi))


def run_hs_chain(X, y, config: HsChainConfig, rng,
                 initial_state: Optional[HsState] = None) -> HsDraws:
    """Run n_iter sweeps and keep every thin-th draw after burn-in"""
    gen = as_generator(rng)
    X = np.asarray(X, dtype=float)
    k = X.shape[1]
    state = initial_state if initial_state is not None else HsState.initial(k)

    S = config.n_retained
    beta_draws = np.empty((S, k))
    sigma2_draws = np.empty(S)
    tau2_draws = np.empty(S)
    lambda2_draws = np.empty((S, k))

    kept = 0
    for it in range(config.n_iter):
        state = hs_gibbs_sweep(state, X, y, config, gen)
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0 and kept < S:
            beta_draws[kept] = state.beta
            sigma2_draws[kept] = state.sigma2
            tau2_draws[kept] = state.tau2
            lambda2_draws[kept] = state.lambda2
            kept += 1

    return HsDraws(beta_draws=beta_draws, sigma2_draws=sigma2_draws,
                   tau2_draws=tau2_draws, lambda2_draws=lambda2_draws)


# ---------------------------------------------------------------------------
# Convergence diagnostics
# ---------------------------------------------------------------------------

def _mean_variance(x):
    x = np.asarray(x, dtype=float)
    lrv = long_run_variance(x, newey_west_lags(x.size))
    if lrv <= 0:
        lrv = float(np.var(x))
    return lrv / x.size


def effective_sample_size(chain) -> float:
    """S / (1 + 2 sum rho), autocorrelation pairs summed until the first negative pair"""
    chain = np.asarray(chain, dtype=float)
    S = chain.size
    rho = autocorrelation(chain)
    tau = -1.0
    m = 0
    while 2 * m + 1 < S:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair < 0:
            break
        tau += 2.0 * pair
        m += 1
    return float(S / max(tau, 1e-12))


def convergence_diagnostics(chain) -> ChainDiagnostics:
    """Geweke z (first 10% vs last 50%) and effective sample size"""
    chain = np.asarray(chain, dtype=float)
    if chain.size < MIN_DIAGNOSTIC_LENGTH:
        raise ValueError(f"Diagnostics need at least {MIN_DIAGNOSTIC_LENGTH} draws")
    if np.ptp(chain) == 0:
        return ChainDiagnostics(geweke_z=0.0, ess=float('inf'), degenerate=True)

    S = chain.size
    first = chain[:int(GEWEKE_FIRST * S)]
    last = chain[S - int(GEWEKE_LAST * S):]
    se2 = _mean_variance(first) + _mean_variance(last)
    z = (first.mean() - last.mean()) / np.sqrt(se2) if se2 > 0 else 0.0
    return ChainDiagnostics(geweke_z=float(z), ess=effective_sample_size(chain))


def chain_report(draws: HsDraws, predictive=None) -> dict:
    """
    Geweke z and ESS for sigma2, tau2 and (optionally) predictive draws

    The coefficients are summarised across j: the smallest ESS and the
    largest |Geweke z| over non-degenerate beta_j chains.
    """
    series = {'sigma2': draws.sigma2_draws, 'tau2': draws.tau2_draws}
    if predictive is not None:
        series['y_pred'] = np.asarray(predictive)
    report = {}
    for name, chain in series.items():
        if chain.size < MIN_DIAGNOSTIC_LENGTH:
            continue
        diag = convergence_diagnostics(chain)
        report[name] = {'geweke_z': diag.geweke_z, 'ess': diag.ess, 'degenerate': diag.degenerate}

    beta = np.asarray(draws.beta_draws, dtype=float)
    if beta.ndim == 2 and beta.shape[0] >= MIN_DIAGNOSTIC_LENGTH and beta.shape[1] > 0:
        per_coef = [convergence_diagnostics(beta[:, j]) for j in range(beta.shape[1])]
        live = [(j, d) for j, d in enumerate(per_coef) if not d.degenerate]
        if live:
            worst_j, worst = max(live, key=lambda item: abs(item[1].geweke_z))
            report['beta'] = {
                'min_ess': min(d.ess for _, d in live),
                'max_abs_geweke_z': abs(worst.geweke_z),
                'worst_index': int(worst_j),
                'n_degenerate': len(per_coef) - len(live),
            }
    return report

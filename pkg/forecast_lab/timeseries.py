"""
Autocovariance and long-run variance helpers
Shared by the MCMC diagnostics and the Diebold-Mariano test
"""

import numpy as np


def autocovariance(x, max_lag):
    """Sample autocovariances gamma_0..gamma_max_lag, divisor T"""
    x = np.asarray(x, dtype=float)
    T = x.size
    d = x - x.mean()
    max_lag = min(int(max_lag), T - 1)
    return np.array([d[j:] @ d[:T - j] / T for j in range(max_lag + 1)])


def autocorrelation(x):
    """Full sample autocorrelation function via FFT"""
    x = np.asarray(x, dtype=float)
    T = x.size
    d = x - x.mean()
    size = 1 << (2 * T - 1).bit_length()
    spectrum = np.fft.rfft(d, n=size)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), n=size)[:T] / T
    if acov[0] <= 0:
        return np.ones(T)
    return acov / acov[0]


def long_run_variance(x, lags):
    """
    Bartlett-weighted long-run variance
    gamma_0 + 2 * sum_{j=1..lags} (1 - j/(lags+1)) gamma_j
    """
    gamma = autocovariance(x, lags)
    lags = gamma.size - 1
    weights = 1.0 - np.arange(1, lags + 1) / (lags + 1)
    return float(gamma[0] + 2.0 * np.sum(weights * gamma[1:]))


def newey_west_lags(T):
    """Automatic bandwidth floor(4 (T/100)^(2/9))"""
    return int(np.floor(4.0 * (T / 100.0) ** (2.0 / 9.0)))

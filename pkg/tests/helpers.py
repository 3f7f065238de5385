"""Shared oracles and check routines used by both unit and acceptance tests."""

import numpy as np

from plumeid.domain import GridSpec
from plumeid.geostat import SpectralCovarianceSpec, covariance_oracle, generate_log_conductivity


def empirical_vs_spectral_covariance(n_realizations=500, n=64, seed0=1000, max_lag=10):
    """Compare sampled-field correlations against the truncated-spectrum oracle.

    Returns ``(lags, emp, oracle)`` arrays of axis-averaged correlations at
    node lags ``1..max_lag`` on an ``n x n`` periodic grid.
    """
    grid = GridSpec(n, n, float(n - 1), float(n - 1))
    oracle = covariance_oracle(SpectralCovarianceSpec(), grid)
    rho_oracle = oracle / oracle[0, 0]

    acc = np.zeros((n, n))
    for s in range(n_realizations):
        f = generate_log_conductivity(SpectralCovarianceSpec(seed=seed0 + s), grid).values
        d = f - f.mean()
        acc += np.fft.ifft2(np.abs(np.fft.fft2(d)) ** 2).real / d.size
    emp = acc / n_realizations
    rho_emp = emp / emp[0, 0]

    lags = np.arange(1, max_lag + 1)
    emp_iso = np.array([0.5 * (rho_emp[0, k] + rho_emp[k, 0]) for k in lags])
    oracle_iso = np.array([0.5 * (rho_oracle[0, k] + rho_oracle[k, 0]) for k in lags])
    return lags, emp_iso, oracle_iso


def ar1_series(rho, n, seed, burn=10_000):
    """AR(1) oracle series x_t = rho * x_{t-1} + e_t, burned in to stationarity."""
    from scipy.signal import lfilter

    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n + burn)
    return lfilter([1.0], [1.0, -rho], e)[burn:]


def geweke_pvalues(n_replicates=200, length=100_000, seed0=0):
    """Geweke p-values over independent white-noise replicates."""
    from plumeid.diagnostics import geweke

    return np.array([
        geweke(np.random.default_rng(seed0 + k).standard_normal(length))
        for k in range(n_replicates)
    ])


def ks_statistic_uniform(values):
    """Kolmogorov-Smirnov distance of a sample from the uniform law on [0, 1]."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(max((grid_hi - v).max(), (v - grid_lo).max()))

"""Chain convergence diagnostics and posterior summaries.

Implements the integrated autocorrelation time with Sokal's adaptive
truncation window, the Geweke stationarity diagnostic (first 10% of the
chain against the last 50%, with windowed spectral variance estimates that
reuse the autocorrelation machinery), a Gaussian kernel density with the
Silverman bandwidth, and the summary table combining per-parameter chain
statistics with the plume masses at the posterior-mean parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft

from .domain import GridSpec, SourceParams, plume_mass, render_initial_condition
from .inference import Chain, PARAM_NAMES

#: Sokal window constant: truncate at the smallest M with M >= c * tau(M).
SOKAL_WINDOW_C = 6.0


def autocorrelations(series: np.ndarray) -> np.ndarray:
    """Empirical autocorrelations rho(0..n-1) via FFT (biased normalization)."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if np.ptp(x) == 0.0:
        raise ValueError("autocorrelation of a constant series is undefined")
    d = x - x.mean()
    var = d @ d
    if var == 0.0:
        raise ValueError("autocorrelation of a constant series is undefined")
    size = scipy.fft.next_fast_len(2 * n)
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    return acov / acov[0]


def iact(series: np.ndarray, window_c: float = SOKAL_WINDOW_C) -> float:
    """Integrated autocorrelation time with adaptive truncation.

    ``tau = 1 + 2 sum_{k=1}^{M} rho(k)`` truncated at the smallest ``M`` with
    ``M >= window_c * tau(M)``; the result is clamped below at 0.5. Requires
    at least 10 points and a non-constant series.
    """
    x = np.asarray(series, dtype=float)
    if x.size < 10:
        raise ValueError("need at least 10 points to estimate an autocorrelation time")
    rho = autocorrelations(x)
    taus = 1.0 + 2.0 * np.cumsum(rho[1:])
    windows = np.arange(1, taus.size + 1)
    hits = np.nonzero(windows >= window_c * taus)[0]
    m = hits[0] if hits.size else taus.size - 1
    return max(float(taus[m]), 0.5)


def _spectral_variance(segment: np.ndarray) -> float:
    """Spectral density at zero frequency: variance times the IACT."""
    seg = np.asarray(segment, dtype=float)
    if np.ptp(seg) == 0.0:
        raise ValueError("zero variance segment")
    return seg.var() * iact(seg)


def geweke(series: np.ndarray) -> float:
    """Two-sided p-value of the Geweke mean-equality z-score.

    Compares the first 10% of the series against the last 50% using
    spectral-density-at-zero variance estimates for both segments.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 100:
        raise ValueError("need at least 100 points for the Geweke diagnostic")
    a = x[: int(0.1 * n)]
    b = x[-int(0.5 * n):]
    s_a = _spectral_variance(a)
    s_b = _spectral_variance(b)
    z = (a.mean() - b.mean()) / math.sqrt(s_a / a.size + s_b / b.size)
    return math.erfc(abs(z) / math.sqrt(2.0))


def silverman_bandwidth(samples: np.ndarray) -> float:
    """``1.06 * s * n**(-1/5)`` with the sample standard deviation ``s``."""
    x = np.asarray(samples, dtype=float)
    s = x.std(ddof=1)
    if s == 0.0:
        raise ValueError("kernel density of a zero-variance sample is undefined")
    return 1.06 * s * x.size ** (-0.2)


def kernel_density(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Gaussian kernel density estimate evaluated on ``grid``."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples for a density estimate")
    h = silverman_bandwidth(x)
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(grid.shape)
    norm = 1.0 / (x.size * h * math.sqrt(2.0 * math.pi))
    # chunked to bound the pairwise-distance workspace
    step = max(1, int(4e6 / max(grid.size, 1)))
    for k in range(0, x.size, step):
        block = x[k: k + step]
        out += np.exp(-0.5 * ((grid[..., None] - block) / h) ** 2).sum(axis=-1)
    return norm * out


def density_grid(samples: np.ndarray, num: int = 512, pad_bandwidths: float = 3.0) -> np.ndarray:
    """Evaluation grid spanning the samples plus a few bandwidths of margin."""
    x = np.asarray(samples, dtype=float)
    h = silverman_bandwidth(x)
    return np.linspace(x.min() - pad_bandwidths * h, x.max() + pad_bandwidths * h, num)


@dataclass(frozen=True)
class ChainSummary:
    """Per-parameter posterior statistics plus the two plume masses."""

    names: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray
    taus: np.ndarray
    geweke_ps: np.ndarray
    masses: tuple[float, ...]
    n_retained: int
    truth: np.ndarray | None = None
    true_masses: tuple[float, ...] | None = None

    @property
    def empty(self) -> bool:
        return self.n_retained == 0

    def to_text(self) -> str:
        if self.empty:
            return "no retained samples (burn-in consumed the whole chain)"
        header = f"{'Parameter':<12}"
        if self.truth is not None:
            header += f"{'True value':>14}"
        header += f"{'Mean':>14}{'Std':>12}{'tau':>14}{'p':>10}"
        lines = [header]
        for k, name in enumerate(self.names):
            line = f"{name:<12}"
            if self.truth is not None:
                line += f"{self.truth[k]:>14.4f}"
            line += f"{self.means[k]:>14.4f}{self.stds[k]:>12.4f}"
            line += f"{self.taus[k]:>14.4f}" if np.isfinite(self.taus[k]) else f"{'-':>14}"
            line += f"{self.geweke_ps[k]:>10.4f}" if np.isfinite(self.geweke_ps[k]) else f"{'-':>10}"
            lines.append(line)
        for k, mass in enumerate(self.masses):
            line = f"{'M_' + str(k + 1):<12}"
            if self.truth is not None:
                ref = self.true_masses[k] if self.true_masses else float("nan")
                line += f"{ref:>14.4f}"
            line += f"{mass:>14.4f}{'-':>12}{'-':>14}{'-':>10}"
            lines.append(line)
        return "\n".join(lines)

    def to_json(self) -> dict:
        out = {
            "n_retained": self.n_retained,
            "parameters": {
                name: {
                    "mean": float(self.means[k]),
                    "std": float(self.stds[k]),
                    "tau": None if not np.isfinite(self.taus[k]) else float(self.taus[k]),
                    "geweke_p": None if not np.isfinite(self.geweke_ps[k]) else float(self.geweke_ps[k]),
                }
                for k, name in enumerate(self.names)
            } if not self.empty else {},
            "masses": [float(m) for m in self.masses],
        }
        if self.truth is not None:
            out["truth"] = [float(v) for v in self.truth]
        if self.true_masses is not None:
            out["true_masses"] = [float(m) for m in self.true_masses]
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))


def source_masses(vector: np.ndarray, porosity: float, grid: GridSpec,
                  half_width: float = 100.0) -> tuple[float, ...]:
    """Plume masses for one parameter vector (window centered on each plume)."""
    params = SourceParams.from_vector(vector)
    c_in = render_initial_condition(params, grid)
    return tuple(
        plume_mass(c_in, center, porosity, half_width) for center in params.centers
    )


def masses_per_sample(samples: np.ndarray, porosity: float, grid: GridSpec) -> np.ndarray:
    """Per-sample plume masses, shape ``(n, n_plumes)``; exportable distribution."""
    return np.array([source_masses(row, porosity, grid) for row in np.atleast_2d(samples)])


def summarize(
    chain: Chain,
    porosity: float,
    grid: GridSpec,
    names: tuple[str, ...] = PARAM_NAMES,
    truth: np.ndarray | None = None,
) -> ChainSummary:
    """Posterior summary in the layout of the study's result tables.

    Means and standard deviations per parameter, the autocorrelation time and
    Geweke p (reported as NaN for degenerate constant coordinates), and the
    plume masses evaluated at the posterior-mean parameter vector.
    """
    if chain.n_retained == 0:
        return ChainSummary(tuple(names), np.array([]), np.array([]), np.array([]),
                            np.array([]), (), 0, truth)
    samples = chain.samples
    dim = samples.shape[1]
    means = samples.mean(axis=0)
    stds = samples.std(axis=0, ddof=1)
    taus = np.full(dim, np.nan)
    ps = np.full(dim, np.nan)
    for k in range(dim):
        try:
            taus[k] = iact(samples[:, k])
            ps[k] = geweke(samples[:, k])
        except ValueError:
            pass  # constant coordinate: tau and p stay NaN
    masses = source_masses(means, porosity, grid)
    true_masses = None
    if truth is not None:
        true_masses = source_masses(np.asarray(truth, dtype=float), porosity, grid)
    return ChainSummary(tuple(names), means, stds, taus, ps, masses, chain.n_retained,
                        None if truth is None else np.asarray(truth, dtype=float),
                        true_masses)

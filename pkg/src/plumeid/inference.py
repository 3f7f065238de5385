"""Delayed-rejection adaptive Metropolis sampling of the source parameters.

The posterior combines a uniform box prior with a Gaussian likelihood whose
covariance is ``sigma**2 I``. Each iteration draws a Gaussian random-walk
proposal; on rejection a second, shorter proposal is attempted and accepted
with the two-stage delayed-rejection probability, which preserves detailed
balance. The proposal covariance is adapted from the running chain history
(recursive mean/covariance updates, no full-history rescans) after a fixed
warm-up iteration. Out-of-prior proposals carry zero density and flow through
the same acceptance formulas, so no resampling is needed.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .transport import ObservationSet

LOG_2PI = float(np.log(2.0 * np.pi))


class ChainError(RuntimeError):
    """Raised when a chain cannot proceed (bad start point, evaluator failure)."""


@dataclass(frozen=True)
class PriorBox:
    """Per-parameter closed intervals of the uniform prior."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        if np.any(lower >= upper):
            raise ValueError("every prior interval needs lower < upper")
        for arr, name in ((lower, "lower"), (upper, "upper")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, m: np.ndarray) -> bool:
        return bool(np.all(m >= self.lower) and np.all(m <= self.upper))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


def default_prior_box() -> PriorBox:
    """Production prior intervals for the 8 source parameters."""
    return PriorBox(
        lower=np.array([0.0, 50.0, 0.0, 50.0, 0.0, 13.0, 0.0, 13.0]),
        upper=np.array([700.0, 900.0, 700.0, 900.0, 100.0, 20.0, 100.0, 20.0]),
    )


#: Parameter names in vector order for the production two-plume problem.
PARAM_NAMES = ("x1_1", "x2_1", "x1_2", "x2_2", "s_1", "sigma_1", "s_2", "sigma_2")


@dataclass(frozen=True)
class DramConfig:
    """Sampler configuration.

    ``scale_sd`` defaults to the standard adaptive-Metropolis prescription
    ``2.38**2 / dim`` when left as ``None``; the initial proposal covariance
    defaults to a diagonal with standard deviation ``width / 50`` per
    dimension.
    """

    n_samples: int = 100_000
    burn_in: int = 50_000
    stages: int = 2
    gamma: float = 0.2
    adapt_start: int = 1000
    adapt_interval: int = 100
    scale_sd: float | None = None
    epsilon: float = 1e-10
    initial_sigma_fraction: float = 1.0 / 50.0
    seed: int = 0
    start: str = "center"  # or "prior" for a random draw from the prior
    keep_full_chain: bool = False

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if not 0 <= self.burn_in <= self.n_samples:
            raise ValueError("burn-in must lie in [0, n_samples]")
        if self.stages < 1:
            raise ValueError("need at least one proposal stage")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.adapt_start < 1 or self.adapt_interval < 1:
            raise ValueError("adaptation constants must be positive")
        if self.start not in ("center", "prior"):
            raise ValueError("start must be 'center' or 'prior'")

    def resolve_scale(self, dim: int) -> float:
        return self.scale_sd if self.scale_sd is not None else 2.38 ** 2 / dim

    def initial_covariance(self, box: PriorBox) -> np.ndarray:
        return np.diag((self.initial_sigma_fraction * box.widths) ** 2)


def log_prior(m: np.ndarray, box: PriorBox) -> float:
    """Log density of the uniform box prior; ``-inf`` outside the box."""
    if not box.contains(np.asarray(m, dtype=float)):
        return -np.inf
    return float(-np.log(box.widths).sum())


def log_likelihood(g_m: np.ndarray, d: ObservationSet) -> float:
    """Gaussian log likelihood with covariance ``sigma**2 I``.

    ``-(N/2) log(2 pi) - N log(sigma) - |d - g|^2 / (2 sigma^2)``.
    """
    g_m = np.asarray(g_m, dtype=float)
    if g_m.shape != d.data.shape:
        raise ValueError(f"prediction length {g_m.shape} does not match data {d.data.shape}")
    if d.sigma <= 0.0:
        raise ValueError("likelihood needs a positive noise standard deviation")
    v = d.data - g_m
    n = d.n_data
    return float(-0.5 * n * LOG_2PI - n * np.log(d.sigma) - (v @ v) / (2.0 * d.sigma ** 2))


class RunningMoments:
    """Streaming mean and covariance (Welford update, sample normalization)."""

    def __init__(self, dim: int):
        self.n = 0
        self.mean = np.zeros(dim)
        self._scatter = np.zeros((dim, dim))

    def update(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self._scatter += np.outer(delta, x - self.mean)

    def covariance(self) -> np.ndarray:
        if self.n < 2:
            raise ValueError("need at least two observations for a covariance")
        return self._scatter / (self.n - 1)


def adapt_covariance(
    history: np.ndarray,
    cfg: DramConfig,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Adapted proposal covariance ``s_d * Cov(history) + s_d * eps * I``.

    Before ``adapt_start`` iterations (or with a degenerate history) the
    initial covariance is returned unchanged. This is the batch reference
    form; :func:`run_chain` maintains the same quantity recursively.
    """
    history = np.atleast_2d(np.asarray(history, dtype=float))
    n, dim = history.shape
    sd = cfg.resolve_scale(dim)
    if n < max(cfg.adapt_start, 2):
        if initial is None:
            raise ValueError("initial covariance required before adaptation starts")
        return initial
    cov = np.cov(history, rowvar=False, ddof=1)
    return sd * cov + sd * cfg.epsilon * np.eye(dim)


class _Proposal:
    """Cached Cholesky machinery for one proposal covariance."""

    def __init__(self, cov: np.ndarray):
        self.cov = cov
        self.chol = np.linalg.cholesky(cov)
        self.chol_inv = scipy.linalg.solve_triangular(self.chol, np.eye(cov.shape[0]),
                                                      lower=True)

    def draw(self, x: np.ndarray, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return x + scale * (self.chol @ rng.standard_normal(x.size))

    def half_mahalanobis(self, delta: np.ndarray) -> float:
        z = self.chol_inv @ delta
        return 0.5 * float(z @ z)


def _log1m_alpha(lp_from: float, lp_to: float) -> float:
    """log(1 - alpha1(from, to)) with alpha1 = min(1, exp(lp_to - lp_from))."""
    delta = lp_to - lp_from
    if delta >= 0.0:
        return -np.inf
    return float(np.log1p(-np.exp(delta)))


def dram_step(
    x: np.ndarray,
    logpost_x: float,
    target: Callable[[np.ndarray], float],
    cov: np.ndarray,
    cfg: DramConfig,
    rng: np.random.Generator,
    proposal: _Proposal | None = None,
) -> tuple[np.ndarray, float, int]:
    """One delayed-rejection step. Returns ``(state, log posterior, stage)``.

    ``stage`` is 1 or 2 for the accepting stage and 0 for a full rejection.
    ``proposal`` may carry a pre-factorized covariance; otherwise ``cov`` is
    factorized on the fly.
    """
    if not np.isfinite(logpost_x):
        raise ChainError("chain stands on a state with non-finite log posterior")
    prop = proposal if proposal is not None else _Proposal(cov)

    y1 = prop.draw(x, rng)
    lp1 = float(target(y1))
    if np.isnan(lp1):
        raise ChainError(f"target returned NaN at proposal {y1}")
    log_alpha1 = min(0.0, lp1 - logpost_x)
    if np.log(rng.uniform()) < log_alpha1:
        return y1, lp1, 1

    if cfg.stages < 2:
        return x, logpost_x, 0

    y2 = prop.draw(x, rng, scale=cfg.gamma)
    lp2 = float(target(y2))
    if np.isnan(lp2):
        raise ChainError(f"target returned NaN at proposal {y2}")
    if lp2 == -np.inf:
        return x, logpost_x, 0

    log_num = (lp2
               - prop.half_mahalanobis(y1 - y2)
               + _log1m_alpha(lp2, lp1))
    log_den = (logpost_x
               - prop.half_mahalanobis(y1 - x)
               + _log1m_alpha(logpost_x, lp1))
    log_alpha2 = min(0.0, log_num - log_den)
    if np.log(rng.uniform()) < log_alpha2:
        return y2, lp2, 2
    return x, logpost_x, 0


@dataclass
class Chain:
    """Retained MCMC samples plus acceptance and adaptation bookkeeping."""

    samples: np.ndarray  # (n_retained, dim), post burn-in
    log_posteriors: np.ndarray
    stages: np.ndarray  # accepting stage per retained sample (0 = repeat)
    burn_in: int
    n_samples: int
    accept_counts: dict[str, int]
    cov_history: list[tuple[int, np.ndarray]] = field(default_factory=list)
    runtime_seconds: float = 0.0
    full_samples: np.ndarray | None = None

    @property
    def n_retained(self) -> int:
        return self.samples.shape[0]

    @property
    def acceptance_rate(self) -> float:
        total = self.n_samples - 1
        if total == 0:
            return 0.0
        return (self.accept_counts["stage1"] + self.accept_counts["stage2"]) / total

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def to_csv(self, path: str | Path, names: Sequence[str] = PARAM_NAMES) -> None:
        """One row per retained sample: parameters, log posterior, stage."""
        names = list(names)
        if len(names) != self.samples.shape[1]:
            raise ValueError("one name per parameter required")
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names + ["log_posterior", "stage_accepted"])
            for row, lp, stage in zip(self.samples, self.log_posteriors, self.stages):
                writer.writerow([repr(float(v)) for v in row] + [repr(float(lp)), int(stage)])

    def sidecar(self, cfg: DramConfig, extra: dict | None = None) -> dict:
        info = {
            "n_samples": self.n_samples,
            "burn_in": self.burn_in,
            "n_retained": self.n_retained,
            "acceptance_rate": self.acceptance_rate,
            "accept_counts": self.accept_counts,
            "runtime_seconds": self.runtime_seconds,
            "config": {
                "stages": cfg.stages,
                "gamma": cfg.gamma,
                "adapt_start": cfg.adapt_start,
                "adapt_interval": cfg.adapt_interval,
                "epsilon": cfg.epsilon,
                "seed": cfg.seed,
                "start": cfg.start,
            },
        }
        if extra:
            info.update(extra)
        return info


def load_chain_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
    """Read back a chain CSV: ``(samples, log_posteriors, stages, names)``."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    names = header[:-2]
    data = np.array([[float(v) for v in row] for row in rows])
    if data.size == 0:
        data = data.reshape(0, len(header))
    return data[:, :-2], data[:, -2], data[:, -1].astype(int), names


def run_chain_target(
    target: Callable[[np.ndarray], float],
    box: PriorBox,
    cfg: DramConfig,
) -> Chain:
    """Run one DRAM chain against an arbitrary log-target.

    The box supplies the start point and the initial proposal scales; the
    target itself is responsible for returning ``-inf`` outside its support.
    Deterministic given ``cfg.seed``.
    """
    rng = np.random.default_rng(cfg.seed)
    x = box.center() if cfg.start == "center" else box.sample(rng)
    lp = float(target(x))
    if not np.isfinite(lp):
        raise ChainError(f"non-finite log posterior {lp} at the start point {x}")

    dim = box.dim
    sd = cfg.resolve_scale(dim)
    proposal = _Proposal(cfg.initial_covariance(box))
    moments = RunningMoments(dim)
    moments.update(x)

    samples = np.empty((cfg.n_samples, dim))
    log_posts = np.empty(cfg.n_samples)
    stages = np.zeros(cfg.n_samples, dtype=int)
    samples[0] = x
    log_posts[0] = lp
    counts = {"stage1": 0, "stage2": 0, "rejected": 0}
    cov_history: list[tuple[int, np.ndarray]] = []

    started = time.perf_counter()
    for n in range(1, cfg.n_samples):
        x, lp, stage = dram_step(x, lp, target, proposal.cov, cfg, rng, proposal=proposal)
        samples[n] = x
        log_posts[n] = lp
        stages[n] = stage
        counts["stage1" if stage == 1 else "stage2" if stage == 2 else "rejected"] += 1
        moments.update(x)
        if n + 1 >= cfg.adapt_start and (n + 1) % cfg.adapt_interval == 0:
            cov = sd * moments.covariance() + sd * cfg.epsilon * np.eye(dim)
            proposal = _Proposal(cov)
            cov_history.append((n + 1, cov))
    runtime = time.perf_counter() - started

    return Chain(
        samples=samples[cfg.burn_in:],
        log_posteriors=log_posts[cfg.burn_in:],
        stages=stages[cfg.burn_in:],
        burn_in=cfg.burn_in,
        n_samples=cfg.n_samples,
        accept_counts=counts,
        cov_history=cov_history,
        runtime_seconds=runtime,
        full_samples=samples if cfg.keep_full_chain else None,
    )


def run_chain(
    evaluator: Callable[[np.ndarray], np.ndarray],
    d: ObservationSet,
    box: PriorBox,
    cfg: DramConfig,
) -> Chain:
    """Run one DRAM chain against an observation set.

    ``evaluator`` maps a parameter vector to the predicted data vector (the
    transport model or its surrogate); it is only consulted for in-prior
    states. Evaluator failures are re-raised as :class:`ChainError` carrying
    the iteration index. Deterministic given ``cfg.seed``.
    """
    log_prior_const = float(-np.log(box.widths).sum())
    calls = [0]

    def posterior(m: np.ndarray) -> float:
        if not box.contains(m):
            return -np.inf
        calls[0] += 1
        try:
            g = evaluator(m)
        except Exception as exc:
            raise ChainError(
                f"forward evaluator failed at evaluation {calls[0]}: {exc}") from exc
        return log_prior_const + log_likelihood(g, d)

    return run_chain_target(posterior, box, cfg)

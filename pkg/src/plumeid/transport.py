"""Advection-dispersion transport of the initial plume and well observation.

Explicit conservative finite-volume time stepping of

    d(theta c)/dt = div(theta D grad c) - div(theta u c) - R(c)

on the node lattice, with first-order upwind advection, a 9-point dispersion
stencil including the off-diagonal tensor component, zero dispersive flux on
all domain edges, and advective outflow across the left/right edges where the
Darcy velocity points outward (inflowing water carries zero concentration).
Every step is flux-form, so the discrete mass balance closes to roundoff:
the change of total mass equals boundary outflow plus the (logged) clamping
of negative undershoots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import (
    GridSpec,
    ScalarField,
    TransportParams,
    WellNetwork,
    read_field,
    write_field,
)
from .flow import VelocityField

#: Days per year used to place the observation times.
YEAR_DAYS = 365.0

_MIN_STEP = 1e-12  # days; smaller stable steps indicate degenerate inputs


class TransportError(RuntimeError):
    """Raised for unusable transport configurations (e.g. step underflow)."""


def dispersion_tensor(speed, params: TransportParams):
    """Velocity-dependent dispersion components ``(D11, D22, D12)`` in m^2/d.

    ``D11 = theta*Dm + alpha_L*|u|``, ``D22 = theta*Dm + alpha_T*|u|`` and the
    constant off-diagonal ``D12 = D21 = theta*Dm``; ``speed`` may be a scalar
    or an array of per-cell velocity magnitudes.
    """
    speed = np.asarray(speed, dtype=float)
    theta_dm = params.porosity * params.molecular_diffusion
    d11 = theta_dm + params.dispersivity_l * speed
    d22 = theta_dm + params.dispersivity_t * speed
    d12 = np.full_like(d11, theta_dm)
    return d11, d22, d12


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step bookkeeping of the transport march."""

    times: np.ndarray  # time at the END of each step (days)
    mass: np.ndarray  # total mass theta*c*area after each step
    outflow: np.ndarray  # boundary advective outflow mass per step
    clamped: np.ndarray  # negative-undershoot mass added by clamping per step
    initial_mass: float

    @property
    def total_clamped(self) -> float:
        return float(self.clamped.sum())

    @property
    def total_outflow(self) -> float:
        return float(self.outflow.sum())

    def balance_errors(self) -> np.ndarray:
        """Per-step mass-balance residual: d(mass) + outflow - clamped."""
        previous = np.concatenate(([self.initial_mass], self.mass[:-1]))
        return (self.mass - previous) + self.outflow - self.clamped


@dataclass(frozen=True)
class TransportSolution:
    """Concentration snapshots at the requested times."""

    times: tuple[float, ...]
    snapshots: tuple[ScalarField, ...]
    diagnostics: StepDiagnostics | None = None

    def __post_init__(self):
        if len(self.times) != len(self.snapshots):
            raise ValueError("one snapshot per requested time")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))

    @property
    def grid(self) -> GridSpec:
        return self.snapshots[0].grid

    def stack(self) -> np.ndarray:
        """Snapshots as one array of shape ``(I, n2, n1)``."""
        return np.stack([s.values for s in self.snapshots])


def stable_step(vel: VelocityField, d11: np.ndarray, d22: np.ndarray,
                grid: GridSpec) -> float:
    """0.9 times the smaller of the advective CFL and explicit dispersion limits."""
    dx, dy = grid.spacing1, grid.spacing2
    adv_rate = np.abs(vel.u1).max(initial=0.0) / dx + np.abs(vel.u2).max(initial=0.0) / dy
    adv_limit = 1.0 / adv_rate if adv_rate > 0 else np.inf
    d_max = max(d11.max(initial=0.0), d22.max(initial=0.0))
    disp_limit = min(dx, dy) ** 2 / (4.0 * d_max) if d_max > 0 else np.inf
    return 0.9 * min(adv_limit, disp_limit)


def simulate_transport(
    c_in: ScalarField,
    vel: VelocityField,
    params: TransportParams,
    times: Sequence[float],
    record_diagnostics: bool = True,
) -> TransportSolution:
    """March the plume forward and capture snapshots exactly at ``times`` (days).

    The step size is the stability limit of :func:`stable_step`; the final
    step before each snapshot is shortened so snapshots land exactly on the
    requested times. Concentrations are clamped at zero after each step and
    the clamped mass is accumulated in the diagnostics.
    """
    grid = c_in.grid
    times = [float(t) for t in times]
    if any(t <= 0.0 for t in times):
        raise TransportError("requested snapshot times must be positive")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise TransportError("requested snapshot times must be strictly increasing")

    dx, dy = grid.spacing1, grid.spacing2
    area = dx * dy
    theta = params.porosity

    speed = vel.node_speed()
    d11, d22, _ = dispersion_tensor(speed, params)
    d12 = theta * params.molecular_diffusion  # constant off-diagonal component
    d11_xface = 0.5 * (d11[:, :-1] + d11[:, 1:])
    d22_yface = 0.5 * (d22[:-1, :] + d22[1:, :])

    u1, u2 = vel.u1, vel.u2
    u1_pos, u1_neg = np.maximum(u1, 0.0), np.minimum(u1, 0.0)
    u2_pos, u2_neg = np.maximum(u2, 0.0), np.minimum(u2, 0.0)
    # Domain-edge x-velocities by constant extrapolation of the nearest face;
    # only the outward-pointing part advects mass (inflow carries c = 0).
    u_left_out = np.minimum(u1[:, 0], 0.0)
    u_right_out = np.maximum(u1[:, -1], 0.0)

    dt_base = stable_step(vel, d11, d22, grid)
    if not np.isfinite(dt_base):
        dt_base = max(times)  # transport-free problem: jump between snapshots
    if dt_base < _MIN_STEP:
        raise TransportError(f"stable step {dt_base:.3e} d underflows the minimum {_MIN_STEP} d")

    c = c_in.values.copy()
    mass0 = theta * area * c.sum()
    log_t, log_mass, log_out, log_clamp = [], [], [], []
    snapshots = []
    t = 0.0

    for target in times:
        while target - t > 1e-9 * max(target, 1.0):
            dt = min(dt_base, target - t)

            # Advective face mass fluxes, positive along +axis.
            f1 = theta * dy * (u1_pos * c[:, :-1] + u1_neg * c[:, 1:])
            f2 = theta * dx * (u2_pos * c[:-1, :] + u2_neg * c[1:, :])
            f1_left = theta * dy * u_left_out * c[:, 0]
            f1_right = theta * dy * u_right_out * c[:, -1]

            # Dispersive face mass fluxes (zero on all domain edges).
            dcdx = np.gradient(c, dx, axis=1)
            dcdy = np.gradient(c, dy, axis=0)
            g1 = -theta * dy * (
                d11_xface * (c[:, 1:] - c[:, :-1]) / dx
                + d12 * 0.5 * (dcdy[:, :-1] + dcdy[:, 1:])
            )
            g2 = -theta * dx * (
                d22_yface * (c[1:, :] - c[:-1, :]) / dy
                + d12 * 0.5 * (dcdx[:-1, :] + dcdx[1:, :])
            )

            rate = np.zeros_like(c)
            rate[:, 1:] += f1 + g1
            rate[:, :-1] -= f1 + g1
            rate[1:, :] += f2 + g2
            rate[:-1, :] -= f2 + g2
            rate[:, 0] += f1_left  # edge flux along +x1; negative values leave the domain
            rate[:, -1] -= f1_right
            if params.reaction is not None:
                rate -= area * np.asarray(params.reaction(c))

            c = c + dt * rate / (theta * area)
            clamp = -theta * area * c[c < 0.0].sum()
            np.maximum(c, 0.0, out=c)
            t += dt

            if record_diagnostics:
                log_t.append(t)
                log_mass.append(theta * area * c.sum())
                log_out.append(dt * (f1_right.sum() - f1_left.sum()))
                log_clamp.append(clamp)
        t = target
        snapshots.append(ScalarField(grid, c))

    diag = None
    if record_diagnostics:
        diag = StepDiagnostics(
            times=np.array(log_t),
            mass=np.array(log_mass),
            outflow=np.array(log_out),
            clamped=np.array(log_clamp),
            initial_mass=mass0,
        )
    return TransportSolution(tuple(times), tuple(snapshots), diag)


@dataclass(frozen=True)
class ObservationSet:
    """The data vector: well concentrations at all observation times plus noise metadata.

    ``data`` is ordered well-major (well 0 at all times, then well 1, ...);
    the noise covariance is ``sigma**2`` times the identity.
    """

    data: np.ndarray
    wells: WellNetwork
    times: tuple[float, ...]
    sigma: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        expected = self.wells.n_wells * len(self.times)
        if data.shape != (expected,):
            raise ValueError(f"data vector must have length {expected}, got {data.shape}")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if self.sigma < 0.0:
            raise ValueError("noise standard deviation must be non-negative")

    @property
    def n_data(self) -> int:
        return self.data.size

    def covariance_diagonal(self) -> np.ndarray:
        return np.full(self.n_data, self.sigma ** 2)


def observe(sol: TransportSolution, wells: WellNetwork,
            times: Sequence[float] | None = None) -> np.ndarray:
    """Noiseless data vector ``g(m)``: snapshot values at the well nodes.

    Ordered well-major then time. If ``times`` is given, every requested time
    must be present among the solution snapshots.
    """
    if times is None:
        selected = list(range(len(sol.times)))
    else:
        available = {t: k for k, t in enumerate(sol.times)}
        missing = [t for t in times if float(t) not in available]
        if missing:
            raise ValueError(f"snapshot times {missing} missing from the solution")
        selected = [available[float(t)] for t in times]
    stack = sol.stack()
    rows = [stack[k, j, i] for (i, j) in wells.nodes for k in selected]
    return np.array(rows, dtype=float)


def add_noise(
    clean: np.ndarray,
    sigma: float,
    seed: int,
    *,
    wells: WellNetwork,
    times: Sequence[float],
) -> ObservationSet:
    """Corrupt a clean data vector with iid Gaussian noise of std ``sigma``."""
    clean = np.asarray(clean, dtype=float)
    rng = np.random.default_rng(seed)
    noisy = clean + sigma * rng.standard_normal(clean.shape)
    return ObservationSet(noisy, wells, tuple(times), sigma)


def default_observation_times() -> tuple[float, ...]:
    """Observation times: 3, 4, ..., 18 years after release, in days."""
    return tuple(YEAR_DAYS * y for y in range(3, 19))


def write_breakthrough_csv(sol: TransportSolution, wells: WellNetwork, path: str | Path) -> None:
    """Breakthrough curves as CSV: one row per time, one column per well."""
    stack = sol.stack()
    header = "time," + ",".join(f"well_{k}" for k in range(wells.n_wells))
    rows = np.column_stack(
        [np.asarray(sol.times)] + [stack[:, j, i] for (i, j) in wells.nodes]
    )
    np.savetxt(path, rows, delimiter=",", header=header, comments="")


def save_solution(sol: TransportSolution, directory: str | Path, prefix: str = "snapshot") -> Path:
    """Persist snapshots as PLF1 files plus a JSON manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for k, snap in enumerate(sol.snapshots):
        name = f"{prefix}_{k:03d}.plf"
        write_field(snap, directory / name)
        names.append(name)
    grid = sol.grid
    manifest = {
        "times": list(sol.times),
        "grid": {"n1": grid.n1, "n2": grid.n2,
                 "length1": grid.length1, "length2": grid.length2},
        "snapshots": names,
    }
    manifest_path = directory / f"{prefix}_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path


def load_solution(manifest_path: str | Path) -> TransportSolution:
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    g = manifest["grid"]
    lengths = (g["length1"], g["length2"])
    snapshots = tuple(
        read_field(manifest_path.parent / name, lengths) for name in manifest["snapshots"]
    )
    return TransportSolution(tuple(manifest["times"]), snapshots)

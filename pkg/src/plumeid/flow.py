"""Steady Darcy flow: head solve and face-velocity reconstruction.

Finite-volume 5-point discretization on the node lattice with harmonic-mean
face transmissibilities. Constant heads are prescribed on the whole left and
right node columns; the top and bottom rows are no-flow. The sparse system
is solved directly and the residual is verified against a hard tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import GridSpec, ScalarField

RESIDUAL_TOL = 1e-10


class FlowSolveError(RuntimeError):
    """Raised when the linear solve does not meet the residual tolerance."""


@dataclass(frozen=True)
class FlowBoundaryConditions:
    """Dirichlet heads on the left/right boundaries (meters); top/bottom no-flow."""

    h_left: float = 10.0
    h_right: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.h_left) and np.isfinite(self.h_right)):
            raise ValueError("boundary heads must be finite")


@dataclass(frozen=True)
class VelocityField:
    """Face-normal macroscopic velocities (m/d) derived from a head solution.

    ``u1`` holds velocities on vertical faces between horizontally adjacent
    nodes, shape ``(n2, n1 - 1)``; ``u2`` on horizontal faces, shape
    ``(n2 - 1, n1)``. Domain-edge faces on the top and bottom are no-flow
    (identically zero and not stored).
    """

    grid: GridSpec
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        for name, arr, shape in (
            ("u1", self.u1, (self.grid.n2, self.grid.n1 - 1)),
            ("u2", self.u2, (self.grid.n2 - 1, self.grid.n1)),
        ):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def node_speed(self) -> np.ndarray:
        """Velocity magnitude per node: arithmetic face average per direction,
        then the Euclidean norm. Missing x-faces at the left/right edges are
        filled by constant extrapolation; edge y-faces are no-flow zeros."""
        u1n, u2n = self.node_components()
        return np.hypot(u1n, u2n)

    def node_components(self) -> tuple[np.ndarray, np.ndarray]:
        u1p = np.pad(self.u1, ((0, 0), (1, 1)), mode="edge")
        u2p = np.pad(self.u2, ((1, 1), (0, 0)), mode="constant")
        return (
            0.5 * (u1p[:, :-1] + u1p[:, 1:]),
            0.5 * (u2p[:-1, :] + u2p[1:, :]),
        )

    def interior_divergence(self) -> np.ndarray:
        """Discrete divergence of the face velocities at interior nodes."""
        d1 = (self.u1[1:-1, 1:] - self.u1[1:-1, :-1]) / self.grid.spacing1
        d2 = (self.u2[1:, 1:-1] - self.u2[:-1, 1:-1]) / self.grid.spacing2
        return d1 + d2

    @property
    def max_speed(self) -> float:
        return float(max(np.abs(self.u1).max(), np.abs(self.u2).max(), 0.0))


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


def face_conductivities(K: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic-mean conductivities on x-faces and y-faces."""
    k = K.values
    return _harmonic(k[:, :-1], k[:, 1:]), _harmonic(k[:-1, :], k[1:, :])


def solve_head(K: ScalarField, bc: FlowBoundaryConditions) -> ScalarField:
    """Solve the steady flow equation for hydraulic head.

    Dirichlet columns at ``x1 = 0`` and ``x1 = L1``, no-flow rows at
    ``x2 = 0`` and ``x2 = L2``. Raises :class:`FlowSolveError` if the
    relative residual of the assembled system exceeds ``1e-10``.
    """
    grid = K.grid
    if np.any(K.values <= 0.0):
        raise ValueError("conductivity must be positive everywhere")
    n1, n2 = grid.n1, grid.n2
    dx, dy = grid.spacing1, grid.spacing2
    kx, ky = face_conductivities(K)
    tx = kx * dy / dx  # transmissibility of x-faces, per unit thickness
    ty = ky * dx / dy

    def idx(j, i):
        return j * n1 + i

    jj, ii = np.meshgrid(np.arange(n2), np.arange(1, n1 - 1), indexing="ij")
    jj, ii = jj.ravel(), ii.ravel()
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    center = idx(jj, ii)
    tw = tx[jj, ii - 1]
    te = tx[jj, ii]
    add(center, idx(jj, ii - 1), -tw)
    add(center, idx(jj, ii + 1), -te)
    diag = tw + te
    south = jj > 0
    ts = np.zeros_like(tw)
    ts[south] = ty[jj[south] - 1, ii[south]]
    add(center[south], idx(jj[south] - 1, ii[south]), -ts[south])
    north = jj < n2 - 1
    tn = np.zeros_like(tw)
    tn[north] = ty[jj[north], ii[north]]
    add(center[north], idx(jj[north] + 1, ii[north]), -tn[north])
    add(center, center, diag + ts + tn)

    b = np.zeros(n1 * n2)
    jb = np.arange(n2)
    for i, h in ((0, bc.h_left), (n1 - 1, bc.h_right)):
        add(idx(jb, i), idx(jb, i), np.ones(n2))
        b[idx(jb, i)] = h

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n1 * n2, n1 * n2))
    h = spla.spsolve(A, b)

    residual = np.linalg.norm(A @ h - b)
    scale = max(np.linalg.norm(b), 1e-300)
    if not np.isfinite(h).all() or residual > RESIDUAL_TOL * scale:
        raise FlowSolveError(
            f"direct solve residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e} * |b| = "
            f"{RESIDUAL_TOL * scale:.3e}"
        )
    return ScalarField(grid, h.reshape(n2, n1))


def compute_velocity(K: ScalarField, head: ScalarField, porosity: float) -> VelocityField:
    """Darcy face velocities ``u = -(K_face / porosity) * grad(h)``.

    Uses the same harmonic-mean face conductivities as the head solve, so the
    face fluxes are exactly those balanced by the discrete flow equations.
    """
    if head.grid != K.grid:
        raise ValueError("head and conductivity live on different grids")
    grid = K.grid
    kx, ky = face_conductivities(K)
    h = head.values
    u1 = -(kx / porosity) * (h[:, 1:] - h[:, :-1]) / grid.spacing1
    u2 = -(ky / porosity) * (h[1:, :] - h[:-1, :]) / grid.spacing2
    return VelocityField(grid, u1, u2)

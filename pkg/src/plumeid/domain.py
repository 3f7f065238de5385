"""Grid geometry, physical parameter records, and the two-plume initial condition.

Conventions used throughout the package:

* the domain is the rectangle ``[0, L1] x [0, L2]`` (meters), discretized by
  ``n1 x n2`` nodes with uniform spacings; node ``(i, j)`` sits at
  ``(i * spacing1, j * spacing2)``,
* field values are stored as arrays of shape ``(n2, n1)`` indexed ``[j, i]``,
  so the fast axis follows ``x1`` (this matches the on-disk layout and the
  image convention used by the surrogate),
* lengths are meters, times are days, conductivities are m/d, concentrations
  are dimensionless volumetric fractions.

All record types are immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

FIELD_MAGIC = b"PLF1"


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular node lattice.

    Defaults reproduce the production domain: 2000 m x 1000 m covered by
    81 x 41 nodes, i.e. 25 m spacing along both axes.
    """

    n1: int = 81
    n2: int = 41
    length1: float = 2000.0
    length2: float = 1000.0

    def __post_init__(self):
        if self.n1 < 2 or self.n2 < 2:
            raise ValueError(f"grid needs at least 2 nodes per axis, got {self.n1}x{self.n2}")
        if self.length1 <= 0 or self.length2 <= 0:
            raise ValueError("domain lengths must be positive")

    @property
    def spacing1(self) -> float:
        return self.length1 / (self.n1 - 1)

    @property
    def spacing2(self) -> float:
        return self.length2 / (self.n2 - 1)

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(n2, n1)`` of fields living on this grid."""
        return (self.n2, self.n1)

    @property
    def n_nodes(self) -> int:
        return self.n1 * self.n2

    def x1_coords(self) -> np.ndarray:
        return np.arange(self.n1) * self.spacing1

    def x2_coords(self) -> np.ndarray:
        return np.arange(self.n2) * self.spacing2

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays ``(X1, X2)``, each of shape ``(n2, n1)``."""
        return np.meshgrid(self.x1_coords(), self.x2_coords())


@dataclass(frozen=True)
class ScalarField:
    """A scalar quantity sampled on every node of a :class:`GridSpec`.

    ``values`` has shape ``(n2, n1)`` and is frozen (non-writeable) on
    construction.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)


@dataclass(frozen=True)
class TransportParams:
    """Constant transport properties (production values of the study aquifer)."""

    porosity: float = 0.3
    molecular_diffusion: float = 1e-9  # m^2/d
    dispersivity_l: float = 10.0  # m
    dispersivity_ratio: float = 10.0  # alpha_L / alpha_T
    reaction: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not 0.0 < self.porosity < 1.0:
            raise ValueError(f"porosity must lie in (0, 1), got {self.porosity}")
        if self.molecular_diffusion < 0.0:
            raise ValueError("molecular diffusion must be non-negative")
        if self.dispersivity_l <= 0.0:
            raise ValueError("longitudinal dispersivity must be positive")
        if self.dispersivity_ratio < 1.0:
            raise ValueError("dispersivity ratio must be >= 1")

    @property
    def dispersivity_t(self) -> float:
        return self.dispersivity_l / self.dispersivity_ratio


@dataclass(frozen=True)
class SourceParams:
    """Parameters of the co-mingling Gaussian plumes forming the initial condition.

    The flat-vector layout is ``(x1_1, x2_1, ..., x1_N, x2_N, S_1, w_1, ...,
    S_N, w_N)``; for the production two-plume case this is the 8-vector
    ``(x1_1, x2_1, x1_2, x2_2, S_1, w_1, S_2, w_2)``.
    """

    centers: tuple[tuple[float, float], ...]
    strengths: tuple[float, ...]
    widths: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.centers) == len(self.strengths) == len(self.widths)):
            raise ValueError("centers, strengths and widths must have equal length")
        if len(self.centers) < 1:
            raise ValueError("need at least one plume")
        object.__setattr__(self, "centers", tuple((float(a), float(b)) for a, b in self.centers))
        object.__setattr__(self, "strengths", tuple(float(s) for s in self.strengths))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))

    @property
    def n_plumes(self) -> int:
        return len(self.centers)

    def to_vector(self) -> np.ndarray:
        coords = [c for xy in self.centers for c in xy]
        tail = [v for sw in zip(self.strengths, self.widths) for v in sw]
        return np.array(coords + tail, dtype=float)

    @classmethod
    def from_vector(cls, vec: Sequence[float]) -> "SourceParams":
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or vec.size % 4 != 0:
            raise ValueError(f"parameter vector length must be a multiple of 4, got {vec.size}")
        n = vec.size // 4
        centers = tuple((vec[2 * k], vec[2 * k + 1]) for k in range(n))
        strengths = tuple(vec[2 * n + 2 * k] for k in range(n))
        widths = tuple(vec[2 * n + 2 * k + 1] for k in range(n))
        return cls(centers, strengths, widths)


#: True source parameters of the synthetic experiment (two plumes).
TRUTH_SOURCE = SourceParams(
    centers=((325.0, 325.0), (562.5, 625.0)),
    strengths=(30.0, 50.0),
    widths=(15.0, 17.0),
)


@dataclass(frozen=True)
class WellNetwork:
    """Observation wells, stored as grid-node indices ``(i, j)``."""

    grid: GridSpec
    nodes: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for i, j in self.nodes:
            if not (0 < i < self.grid.n1 - 1 and 0 < j < self.grid.n2 - 1):
                raise ValueError(f"well node ({i}, {j}) is not strictly inside the domain")
            if (i, j) in seen:
                raise ValueError(f"duplicate well node ({i}, {j})")
            seen.add((i, j))
        object.__setattr__(self, "nodes", tuple((int(i), int(j)) for i, j in self.nodes))

    @property
    def n_wells(self) -> int:
        return len(self.nodes)

    def coordinates(self) -> np.ndarray:
        """Well coordinates in meters, shape ``(M, 2)``."""
        return np.array(
            [(i * self.grid.spacing1, j * self.grid.spacing2) for i, j in self.nodes]
        )

    @classmethod
    def from_coordinates(
        cls, grid: GridSpec, coords: Sequence[tuple[float, float]]
    ) -> "WellNetwork":
        return cls(grid, tuple(node_at(grid, xy) for xy in coords))


def default_well_network(grid: GridSpec | None = None) -> WellNetwork:
    """The default 5 x 4 monitoring lattice downstream of the prior source box.

    Columns at x1 = 800, 1050, ..., 1800 m and rows at x2 = 150, 400, 650,
    900 m (M = 20 wells).
    """
    grid = grid or GridSpec()
    coords = [(x1, x2) for x1 in (800.0, 1050.0, 1300.0, 1550.0, 1800.0)
              for x2 in (150.0, 400.0, 650.0, 900.0)]
    return WellNetwork.from_coordinates(grid, coords)


def node_at(grid: GridSpec, x: tuple[float, float]) -> tuple[int, int]:
    """Index ``(i, j)`` of the node nearest to coordinate ``x = (x1, x2)``.

    Exact midpoints round toward the higher index. Raises ``ValueError`` for
    coordinates outside the domain.
    """
    x1, x2 = float(x[0]), float(x[1])
    if not (0.0 <= x1 <= grid.length1 and 0.0 <= x2 <= grid.length2):
        raise ValueError(f"coordinate {x} lies outside the domain")
    i = min(int(math.floor(x1 / grid.spacing1 + 0.5)), grid.n1 - 1)
    j = min(int(math.floor(x2 / grid.spacing2 + 0.5)), grid.n2 - 1)
    return i, j


def render_initial_condition(m: SourceParams, grid: GridSpec) -> ScalarField:
    """Evaluate the superposition of Gaussian plumes at every grid node.

    Each plume contributes ``S * exp(-((x1-c1)^2 + (x2-c2)^2) / (2 w^2))``.
    """
    for w in m.widths:
        if w <= 0.0:
            raise ValueError(f"plume width must be positive, got {w}")
    x1, x2 = grid.mesh()
    values = np.zeros(grid.shape)
    for (c1, c2), s, w in zip(m.centers, m.strengths, m.widths):
        values += s * np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / (2.0 * w * w))
    return ScalarField(grid, values)


def plume_mass(
    c_in: ScalarField,
    center: tuple[float, float],
    porosity: float,
    half_width: float = 100.0,
) -> float:
    """Contained mass around ``center``: porosity times the plain nodal sum.

    Sums concentration over all nodes whose coordinates fall in the closed
    square window ``[center +- half_width]`` clipped to the domain. Unit
    nodal weights (not node areas) are used; on the default 25 m lattice this
    is the convention under which the reference masses of the two production
    plumes are reproduced.
    """
    grid = c_in.grid
    cx, cy = float(center[0]), float(center[1])
    if half_width <= 0.0:
        raise ValueError("half_width must be positive")
    if (cx + half_width < 0.0 or cx - half_width > grid.length1
            or cy + half_width < 0.0 or cy - half_width > grid.length2):
        raise ValueError(f"mass window around {center} lies entirely outside the domain")
    in1 = np.abs(grid.x1_coords() - cx) <= half_width
    in2 = np.abs(grid.x2_coords() - cy) <= half_width
    return float(porosity * c_in.values[np.ix_(in2, in1)].sum())


def write_field(field: ScalarField, path: str | Path) -> None:
    """Write a field in the PLF1 binary layout.

    Magic ``PLF1``, then ``n1`` and ``n2`` as little-endian uint32, then
    ``n1 * n2`` little-endian float64 values with the ``x1`` index varying
    fastest.
    """
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<II", field.grid.n1, field.grid.n2))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path: str | Path, lengths: tuple[float, float] = (2000.0, 1000.0)) -> ScalarField:
    """Read a PLF1 field written by :func:`write_field`.

    The format stores node counts only; physical domain lengths are supplied
    by the caller (defaults to the production domain).
    """
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != FIELD_MAGIC:
        raise ValueError(f"{path} is not a PLF1 field file")
    n1, n2 = struct.unpack("<II", raw[4:12])
    expected = 12 + 8 * n1 * n2
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for a {n1}x{n2} field, got {len(raw)}")
    values = np.frombuffer(raw[12:], dtype="<f8").reshape(n2, n1)
    return ScalarField(GridSpec(n1, n2, lengths[0], lengths[1]), values)


def write_field_csv(field: ScalarField, path: str | Path) -> None:
    """Debug CSV dump: one row per x2 level, columns along x1."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in field.values:
            writer.writerow([repr(float(v)) for v in row])


def read_field_csv(path: str | Path, lengths: tuple[float, float] = (2000.0, 1000.0)) -> ScalarField:
    with Path(path).open(newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    values = np.array(rows)
    return ScalarField(GridSpec(values.shape[1], values.shape[0], lengths[0], lengths[1]), values)

"""Training-data design and generation for the surrogate.

Designs come from Latin hypercube sampling of the prior box; each design is
pushed through the transport pipeline and stored as an (input map, stacked
snapshot maps) pair. Datasets persist as a directory of field binaries plus
a JSON index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..domain import GridSpec, ScalarField, read_field, write_field


def latin_hypercube(n: int, intervals: Sequence[tuple[float, float]], seed: int) -> np.ndarray:
    """Latin hypercube design: ``n`` points, one per equal-width stratum and
    dimension. Returns an array of shape ``(n, d)``; deterministic given the
    seed."""
    if n < 1:
        raise ValueError("need at least one design point")
    intervals = [(float(lo), float(hi)) for lo, hi in intervals]
    for lo, hi in intervals:
        if not lo < hi:
            raise ValueError(f"degenerate interval ({lo}, {hi})")
    rng = np.random.default_rng(seed)
    d = len(intervals)
    design = np.empty((n, d))
    for k, (lo, hi) in enumerate(intervals):
        strata = rng.permutation(n)
        design[:, k] = lo + (hi - lo) * (strata + rng.uniform(size=n)) / n
    return design


@dataclass(frozen=True)
class Dataset:
    """Input plume maps and their simulated snapshot stacks (float32)."""

    inputs: np.ndarray  # (N, n2, n1)
    outputs: np.ndarray  # (N, I, n2, n1)
    design_vectors: np.ndarray  # provenance: (N, 8) source parameters
    grid: GridSpec
    times: tuple[float, ...]

    def __post_init__(self):
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError("one output stack per input map")
        if self.inputs.shape[1:] != self.outputs.shape[2:]:
            raise ValueError("input and output grids differ")
        if self.outputs.shape[1] != len(self.times):
            raise ValueError("one output channel per snapshot time")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def subset(self, index) -> "Dataset":
        return Dataset(self.inputs[index], self.outputs[index],
                       self.design_vectors[index], self.grid, self.times)


class DatasetGenerationError(RuntimeError):
    """Raised when the transport pipeline fails on one of the designs."""


def generate_dataset(
    designs: np.ndarray,
    forward: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    split: tuple[int, int],
    grid: GridSpec,
    times: Sequence[float],
) -> tuple[Dataset, Dataset]:
    """Simulate every design and split the pairs into train and test sets.

    ``forward`` maps a parameter vector to ``(c_in map, stacked snapshots)``.
    The first ``split[0]`` designs form the training set, the next
    ``split[1]`` the test set; both counts must be covered by ``designs``.
    """
    designs = np.atleast_2d(np.asarray(designs, dtype=float))
    n_train, n_test = split
    if n_train < 1 or n_test < 0:
        raise ValueError("need a positive training count")
    if n_train + n_test > designs.shape[0]:
        raise ValueError(
            f"split {split} needs {n_train + n_test} designs, got {designs.shape[0]}")

    inputs, outputs = [], []
    for k, vector in enumerate(designs[: n_train + n_test]):
        try:
            c_in, stack = forward(vector)
        except Exception as exc:
            raise DatasetGenerationError(f"transport failed on design {k}: {exc}") from exc
        inputs.append(np.asarray(c_in, dtype=np.float32))
        outputs.append(np.asarray(stack, dtype=np.float32))
    inputs = np.stack(inputs)
    outputs = np.stack(outputs)
    times = tuple(float(t) for t in times)
    full = Dataset(inputs, outputs, designs[: n_train + n_test], grid, times)
    return full.subset(slice(0, n_train)), full.subset(slice(n_train, n_train + n_test))


def save_dataset(dataset: Dataset, directory: str | Path) -> Path:
    """Persist as field binaries plus a JSON index; returns the index path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid = dataset.grid
    records = []
    for k in range(len(dataset)):
        in_name = f"pair_{k:04d}_in.plf"
        write_field(ScalarField(grid, dataset.inputs[k].astype(float)), directory / in_name)
        out_names = []
        for c in range(dataset.outputs.shape[1]):
            out_name = f"pair_{k:04d}_t{c:02d}.plf"
            write_field(ScalarField(grid, dataset.outputs[k, c].astype(float)),
                        directory / out_name)
            out_names.append(out_name)
        records.append({
            "input": in_name,
            "outputs": out_names,
            "design": [float(v) for v in dataset.design_vectors[k]],
        })
    index = {
        "grid": {"n1": grid.n1, "n2": grid.n2,
                 "length1": grid.length1, "length2": grid.length2},
        "times": list(dataset.times),
        "pairs": records,
    }
    index_path = directory / "index.json"
    index_path.write_text(json.dumps(index, indent=2))
    return index_path


def load_dataset(index_path: str | Path) -> Dataset:
    index_path = Path(index_path)
    index = json.loads(index_path.read_text())
    g = index["grid"]
    grid = GridSpec(g["n1"], g["n2"], g["length1"], g["length2"])
    lengths = (grid.length1, grid.length2)
    inputs, outputs, designs = [], [], []
    for rec in index["pairs"]:
        inputs.append(read_field(index_path.parent / rec["input"], lengths).values)
        outputs.append(np.stack([
            read_field(index_path.parent / name, lengths).values for name in rec["outputs"]
        ]))
        designs.append(rec["design"])
    return Dataset(
        np.asarray(inputs, dtype=np.float32),
        np.asarray(outputs, dtype=np.float32),
        np.asarray(designs, dtype=float),
        grid,
        tuple(index["times"]),
    )

"""Discrete trajectory-parameter grids and on-demand steering-matrix atoms.

A grid is the Cartesian product of per-parameter axes (phi first, then the
model coefficients), linearized row-major with phi as the slowest axis. Grids
and the tables derived from them are immutable; derived tables are memoized
in small bounded caches so repeated scans do not recompute trigonometry.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import ArrayConfig, TrajectoryModel, TrajectoryParams, DEG, trajectory_basis


@dataclass(frozen=True)
class GridAxis:
    name: str
    start: float
    step: float
    stop: float

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"axis {self.name}: step must be positive")
        if self.stop < self.start:
            raise ValueError(f"axis {self.name}: stop < start")

    @property
    def size(self) -> int:
        # floor((stop-start)/step) + 1, guarded against fp round-down
        return int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1

    def values(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.size)


@dataclass(frozen=True)
class ParamGrid:
    """Discrete trajectory-parameter space: one axis per parameter."""

    axes: tuple[GridAxis, ...]
    model: TrajectoryModel

    def __post_init__(self):
        if len(self.axes) != self.model.n_params:
            raise ValueError(
                f"grid needs {self.model.n_params} axes for this model, got {len(self.axes)}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.size for ax in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def build_grid(axes, model: TrajectoryModel) -> ParamGrid:
    """Build a grid from (name, start, step, stop) axis descriptors.

    Axis order is (phi, coefficients...) and matches the parameter vector;
    linear indices run row-major over that order.
    """
    built = tuple(GridAxis(str(n), float(a), float(s), float(b)) for n, a, s, b in axes)
    return ParamGrid(built, model)


def grid_point(grid: ParamGrid, index: int) -> TrajectoryParams:
    """Parameters at a linear index; inverse of `grid_index`."""
    if not 0 <= index < grid.size:
        raise IndexError(f"grid index {index} out of range [0, {grid.size})")
    multi = np.unravel_index(index, grid.shape)
    vals = [ax.values()[i] for ax, i in zip(grid.axes, multi)]
    return TrajectoryParams(grid.model, vals[0], tuple(vals[1:]))


def grid_index(grid: ParamGrid, multi) -> int:
    """Linear index of a multi-index (row-major, phi slowest)."""
    return int(np.ravel_multi_index(tuple(multi), grid.shape))


@lru_cache(maxsize=8)
def _param_matrix(grid: ParamGrid) -> np.ndarray:
    cols = np.meshgrid(*(ax.values() for ax in grid.axes), indexing="ij")
    mat = np.stack([c.reshape(-1) for c in cols], axis=1)
    mat.setflags(write=False)
    return mat


def param_matrix(grid: ParamGrid) -> np.ndarray:
    """All grid points as an (M, n_params) matrix in linear-index order."""
    return _param_matrix(grid)


@lru_cache(maxsize=8)
def doa_table(grid: ParamGrid, L: int) -> np.ndarray:
    """DOA in degrees of every grid trajectory at every snapshot, shape (M, L)."""
    pm = param_matrix(grid)
    basis = trajectory_basis(grid.model, L)
    theta = pm[:, :1] + pm[:, 1:] @ basis
    theta.setflags(write=False)
    return theta


@lru_cache(maxsize=8)
def phase_table(grid: ParamGrid, L: int, phase_scale: float) -> np.ndarray:
    """Per-snapshot sensor-1 phasors ``exp(j*phase_scale*sin(theta))`` for the
    whole grid, shape (M, L). Sensor n uses the n-th power of these entries."""
    theta = doa_table(grid, L)
    table = np.exp(1j * phase_scale * np.sin(theta * DEG))
    table.setflags(write=False)
    return table


def atom(grid: ParamGrid, index: int, array: ArrayConfig, L: int, wavelength: float) -> np.ndarray:
    """Trajectory steering matrix (N x L) of one grid point."""
    from .model import trajectory_steering_matrix

    return trajectory_steering_matrix(grid_point(grid, index), array, L, wavelength)

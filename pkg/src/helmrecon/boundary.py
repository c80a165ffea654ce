"""Measurement boundary: the perimeter of the computational square."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Grid2D, GridError, ScalarField2D


class BoundaryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryGeometry:
    """Perimeter nodes in one counter-clockwise loop starting at (-0.5, -0.5).

    ``index`` holds the ``(i, j)`` grid index of each node, ``normals`` the
    outward unit normal (corners get the diagonal) and ``weights`` the
    trapezoid arc-length weight, ``h`` everywhere including corners.
    """

    grid: Grid2D
    index: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    corner: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def points(self) -> np.ndarray:
        x = self.grid.coords
        return np.stack([x[self.index[:, 0]], x[self.index[:, 1]]], axis=1)


@lru_cache(maxsize=32)
def boundary_geometry(grid: Grid2D) -> BoundaryGeometry:
    n = grid.n
    last = n - 1
    idx, nrm = [], []
    s = 1 / np.sqrt(2)
    for i in range(0, last):  # bottom, left to right
        idx.append((i, 0))
        nrm.append((-s, -s) if i == 0 else (0.0, -1.0))
    for j in range(0, last):  # right, bottom to top
        idx.append((last, j))
        nrm.append((s, -s) if j == 0 else (1.0, 0.0))
    for i in range(last, 0, -1):  # top, right to left
        idx.append((i, last))
        nrm.append((s, s) if i == last else (0.0, 1.0))
    for j in range(last, 0, -1):  # left, top to bottom
        idx.append((0, j))
        nrm.append((-s, s) if j == last else (-1.0, 0.0))
    index = np.array(idx, dtype=int)
    corner = np.array([i in (0, last) and j in (0, last) for i, j in idx])
    weights = np.full(len(idx), grid.h)
    for arr in (index, corner, weights):
        arr.setflags(write=False)
    normals = np.array(nrm)
    normals.setflags(write=False)
    return BoundaryGeometry(grid, index, normals, weights, corner)


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    geometry: BoundaryGeometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (len(self.geometry),):
            raise BoundaryError(
                f"trace has {vals.shape} values, geometry has {len(self.geometry)} nodes"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        check_aligned(self, other)
        return BoundaryTrace(self.geometry, self.values + other.values)

    def __sub__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        check_aligned(self, other)
        return BoundaryTrace(self.geometry, self.values - other.values)

    @classmethod
    def zeros(cls, geometry: BoundaryGeometry) -> "BoundaryTrace":
        return cls(geometry, np.zeros(len(geometry), dtype=complex))


def check_aligned(a: BoundaryTrace, b: BoundaryTrace) -> None:
    if len(a.values) != len(b.values) or a.geometry.grid != b.geometry.grid:
        raise BoundaryError(
            f"traces are not aligned ({len(a.values)} vs {len(b.values)} nodes)"
        )


def dirichlet_trace(f: ScalarField2D, geometry: BoundaryGeometry | None = None) -> BoundaryTrace:
    geometry = geometry or boundary_geometry(f.grid)
    if geometry.grid != f.grid:
        raise GridError("field and boundary geometry use different grids")
    return BoundaryTrace(geometry, f.values[geometry.index[:, 0], geometry.index[:, 1]])


def boundary_integral(a: BoundaryTrace, b: BoundaryTrace) -> complex:
    """Bilinear pairing ``sum a * b * weight`` (no conjugation)."""
    check_aligned(a, b)
    return complex(np.sum(a.values * b.values * a.geometry.weights))

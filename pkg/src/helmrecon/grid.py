"""Computational square, sampled fields and synthetic coefficients.

All fields live on the square [-0.5, 0.5]^2 sampled at ``n`` equidistant
points per side.  Arrays are indexed ``values[i, j]`` where ``i`` runs along
x and ``j`` along y, so node ``(i, j)`` sits at ``(-0.5 + i*h, -0.5 + j*h)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

SQUARE_HALF_WIDTH = 0.5


class GridError(ValueError):
    """Raised for malformed grids or fields."""


@dataclass(frozen=True)
class Grid2D:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise GridError(f"grid needs at least 3 points per side, got {self.n!r}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def spacing(self) -> Fraction:
        """Exact rational spacing, ``h * (n - 1) == 1``."""
        return Fraction(1, self.n - 1)

    @property
    def coords(self) -> np.ndarray:
        # i*h rather than linspace so the two ends are exactly +-0.5
        return -SQUARE_HALF_WIDTH + np.arange(self.n) / (self.n - 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.coords
        return np.meshgrid(x, x, indexing="ij")

    @property
    def size(self) -> int:
        return self.n * self.n


def build_grid(n: int) -> Grid2D:
    return Grid2D(int(n))


@dataclass(frozen=True, eq=False)
class ScalarField2D:
    """Complex samples of a function on a :class:`Grid2D`."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n, self.grid.n):
            raise GridError(
                f"field shape {vals.shape} does not match grid {self.grid.n}x{self.grid.n}"
            )
        if not np.all(np.isfinite(vals)):
            raise GridError("field contains non-finite values")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ScalarField2D":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=complex))

    def __add__(self, other: "ScalarField2D") -> "ScalarField2D":
        check_same_grid(self, other)
        return ScalarField2D(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField2D") -> "ScalarField2D":
        check_same_grid(self, other)
        return ScalarField2D(self.grid, self.values - other.values)

    def scale(self, a: complex) -> "ScalarField2D":
        return ScalarField2D(self.grid, a * self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def check_same_grid(*fields: ScalarField2D) -> Grid2D:
    grids = {f.grid for f in fields}
    if len(grids) != 1:
        raise GridError(f"fields live on different grids: {sorted(g.n for g in grids)}")
    return fields[0].grid


@dataclass(frozen=True)
class SupportSpec:
    """Closed disk around the origin that contains every coefficient."""

    radius: float = 0.35
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if tuple(self.center) != (0.0, 0.0):
            raise GridError("support disk must be centred at the origin")
        if not 0.0 < self.radius < SQUARE_HALF_WIDTH:
            raise GridError(f"support radius must lie in (0, 0.5), got {self.radius}")


@dataclass(frozen=True)
class Bump:
    """``amplitude * (1 - r^2/width^2)^3`` clipped at zero (C^2, compact)."""

    center: tuple[float, float]
    amplitude: float
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise GridError(f"bump width must be positive, got {self.width}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        r2 = ((x - self.center[0]) ** 2 + (y - self.center[1]) ** 2) / self.width**2
        return self.amplitude * np.clip(1.0 - r2, 0.0, None) ** 3

    def integral(self) -> float:
        """Exact area integral, ``amplitude * pi * width^2 / 4``."""
        return self.amplitude * np.pi * self.width**2 / 4.0


def synth_coefficient(
    grid: Grid2D,
    bumps: Iterable[Bump],
    support: SupportSpec = SupportSpec(),
) -> ScalarField2D:
    """Sum of compact bumps, each required to sit inside ``support``.

    A bump is rejected unless its whole disk ``|x - center| <= width`` is
    contained in the support disk, so the field vanishes identically outside.
    """
    X, Y = grid.mesh()
    total = np.zeros((grid.n, grid.n))
    for b in bumps:
        reach = np.hypot(*b.center) + b.width
        if np.hypot(*b.center) >= support.radius or reach > support.radius + 1e-12:
            raise GridError(
                f"bump at {b.center} with width {b.width} leaves the support "
                f"disk of radius {support.radius}"
            )
        total += b.evaluate(X, Y)
    total[X**2 + Y**2 > support.radius**2] = 0.0
    return ScalarField2D(grid, total.astype(complex))


def trapezoid_weights(grid: Grid2D) -> np.ndarray:
    w = np.full(grid.n, grid.h)
    w[0] = w[-1] = grid.h / 2
    return w


def volume_quadrature(f: ScalarField2D) -> complex:
    """2-D trapezoidal rule over the square."""
    w = trapezoid_weights(f.grid)
    return complex(w @ f.values @ w)


# --- field dump / image formats ------------------------------------------

DUMP_MAGIC = "HELMFIELD v1"


def write_field(path, f: ScalarField2D) -> None:
    """Write ``HELMFIELD v1 n=<n>`` then n^2 little-endian (re, im) float64 pairs."""
    header = f"{DUMP_MAGIC} n={f.grid.n}\n".encode("ascii")
    body = np.ascontiguousarray(f.values).astype("<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_field(path) -> ScalarField2D:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        body = fh.read()
    parts = header.split()
    if len(parts) != 3 or " ".join(parts[:2]) != DUMP_MAGIC or not parts[2].startswith("n="):
        raise GridError(f"not a field dump: header {header!r}")
    n = int(parts[2][2:])
    vals = np.frombuffer(body, dtype="<c16")
    if vals.size != n * n:
        raise GridError(f"field dump holds {vals.size} values, expected {n * n}")
    return ScalarField2D(Grid2D(n), vals.reshape(n, n))


def write_pgm(path, f: ScalarField2D, vmax: float | None = None) -> None:
    """Magnitude map as a 16-bit binary PGM, y increasing upwards."""
    mag = np.abs(f.values).T[::-1]
    top = float(vmax) if vmax is not None else float(mag.max())
    scaled = np.zeros_like(mag) if top <= 0 else np.clip(mag / top, 0.0, 1.0)
    pixels = np.round(scaled * 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{f.grid.n} {f.grid.n}\n65535\n".encode("ascii"))
        fh.write(pixels.tobytes())


def bumps_from_spec(spec: Sequence[Sequence[float]]) -> list[Bump]:
    """``[(cx, cy, amplitude, width), ...]`` -> bumps."""
    return [Bump((cx, cy), a, w) for cx, cy, a, w in spec]

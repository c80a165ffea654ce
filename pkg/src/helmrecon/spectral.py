"""Fourier modes of coefficients on the 2*pi integer lattice.

Convention: ``F[c](xi) = int c(x) exp(+i x.xi) dx``.  Because every
coefficient is supported inside the unit square, its values on
``xi = 2*pi*(p, q)`` are exactly the Fourier-series coefficients of the
square, and the truncated inverse is the finite sum
``c(x) = sum F(xi) exp(-i x.xi)`` with unit weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .grid import Grid2D, ScalarField2D, trapezoid_weights

LATTICE_STEP = 2 * np.pi
_BAND_RTOL = 1e-12
_SNAP_TOL = 1e-9

MISSING, IN_BAND, RING, SYNTHETIC = 0, 1, 2, 3


class SpectralError(ValueError):
    pass


class OutOfBandError(SpectralError):
    pass


@dataclass(frozen=True)
class FrequencyGrid:
    """Lattice ``2*pi*(p, q)`` within ``radius`` plus ``margin`` extra cells."""

    radius: float
    margin: int = 2

    def __post_init__(self):
        if self.radius <= 0:
            raise SpectralError(f"band radius must be positive, got {self.radius}")
        if self.margin < 0:
            raise SpectralError(f"margin must be >= 0, got {self.margin}")

    @property
    def outer_radius(self) -> float:
        return self.radius + self.margin * LATTICE_STEP

    @property
    def half_width(self) -> int:
        return int(np.floor(self.outer_radius / LATTICE_STEP * (1 + _BAND_RTOL)))

    def in_band(self, p: int, q: int) -> bool:
        return LATTICE_STEP * np.hypot(p, q) <= self.radius * (1 + _BAND_RTOL)

    def _collect(self, outer: bool) -> list[tuple[int, int]]:
        b = self.half_width
        lim = self.outer_radius if outer else self.radius
        out = []
        for p in range(-b, b + 1):
            for q in range(-b, b + 1):
                if (p, q) == (0, 0):
                    continue
                if LATTICE_STEP * np.hypot(p, q) <= lim * (1 + _BAND_RTOL):
                    out.append((p, q))
        return out

    @cached_property
    def band_points(self) -> tuple[tuple[int, int], ...]:
        """In-band lattice indices without the origin, ordered by (p, q)."""
        return tuple(self._collect(outer=False))

    @cached_property
    def ring_points(self) -> tuple[tuple[int, int], ...]:
        inner = set(self.band_points)
        return tuple(pq for pq in self._collect(outer=True) if pq not in inner)

    @staticmethod
    def xi(pq: tuple[int, int]) -> np.ndarray:
        return LATTICE_STEP * np.asarray(pq, dtype=float)


class SpectrumTable:
    """Values on a :class:`FrequencyGrid`, stored on the enclosing square box."""

    def __init__(self, fgrid: FrequencyGrid, ell: int = 0, fill: str = "extrapolate"):
        if fill not in FILL_POLICIES:
            raise SpectralError(f"fill must be one of {FILL_POLICIES}, got {fill!r}")
        self.fgrid = fgrid
        self.ell = ell
        self.fill = fill
        b = fgrid.half_width
        self._b = b
        self.values = np.zeros((2 * b + 1, 2 * b + 1), dtype=complex)
        self.status = np.zeros((2 * b + 1, 2 * b + 1), dtype=np.int8)

    @property
    def radius(self) -> float:
        return self.fgrid.radius

    def _ix(self, p: int, q: int) -> tuple[int, int]:
        if max(abs(p), abs(q)) > self._b:
            raise OutOfBandError(f"lattice index ({p}, {q}) outside table box")
        return p + self._b, q + self._b

    def set(self, pq: tuple[int, int], value: complex, status: int = IN_BAND) -> None:
        self.__dict__.pop("_filled", None)
        ix = self._ix(*pq)
        self.values[ix] = value
        self.status[ix] = status

    def get(self, pq: tuple[int, int]) -> complex:
        ix = self._ix(*pq)
        if self.status[ix] == MISSING:
            raise SpectralError(f"no value stored at lattice index {pq}")
        return complex(self.values[ix])

    def has(self, pq: tuple[int, int]) -> bool:
        try:
            return self.status[self._ix(*pq)] != MISSING
        except OutOfBandError:
            return False

    def entries(self) -> list[tuple[int, int, complex, int]]:
        """Stored ``(p, q, value, status)`` ordered by (p, q)."""
        out = []
        b = self._b
        for i, j in zip(*np.nonzero(self.status)):
            out.append((int(i) - b, int(j) - b, complex(self.values[i, j]), int(self.status[i, j])))
        return out

    def band_mask(self) -> np.ndarray:
        """Entries that enter the truncated inverse: in-band values and the origin."""
        return (self.status == IN_BAND) | (self.status == SYNTHETIC)

    def copy(self) -> "SpectrumTable":
        t = SpectrumTable(self.fgrid, self.ell, self.fill)
        t.values = self.values.copy()
        t.status = self.status.copy()
        return t

    def synthesize_origin(self) -> complex:
        """Fill xi = 0 with the mean of its four lattice neighbours, tagged synthetic."""
        nbrs = [(1, 0), (-1, 0), (0, 1), (0, -1)]
        if not all(self.has(pq) for pq in nbrs):
            raise SpectralError("band too small to synthesise the xi = 0 value")
        dc = sum(self.get(pq) for pq in nbrs) / 4
        self.set((0, 0), dc, SYNTHETIC)
        return dc

    @property
    def _filled(self) -> np.ndarray:
        """Box padded by two cells with every missing node filled per ``fill``."""
        cached = self.__dict__.get("_filled")
        if cached is not None:
            return cached
        pad = 2
        present = np.pad(self.status != MISSING, pad)
        vals = np.pad(self.values, pad)
        if not present.any():
            raise SpectralError("empty spectrum table")
        filled = _fill_missing(vals, present, self.fill)
        self.__dict__["_filled"] = filled
        return filled


FILL_POLICIES = ("extrapolate", "nearest")
EXTRAPOLATION_RADIUS = 4.5  # lattice cells


def _cubic_basis(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.stack([np.ones_like(p), p, q, p * p, p * q, q * q, p**3, p * p * q, p * q * q, q**3], axis=-1)


def _fill_missing(vals: np.ndarray, present: np.ndarray, policy: str) -> np.ndarray:
    """Fill nodes outside the stored set.

    ``nearest`` copies the closest stored node.  ``extrapolate`` fits a local
    cubic by least squares to the stored nodes within
    ``EXTRAPOLATION_RADIUS`` cells and falls back to ``nearest`` where too
    few nodes are in reach.
    """
    _, (ii, jj) = ndimage.distance_transform_edt(~present, return_indices=True)
    out = vals[ii, jj]
    if policy == "nearest":
        return out
    n = present.shape[0]
    c = (n - 1) // 2
    pidx, qidx = np.nonzero(present)
    pp = (pidx - c).astype(float)
    qq = (qidx - c).astype(float)
    vv = vals[present]
    need = _cubic_basis(np.zeros(1), np.zeros(1)).shape[1] + 2
    for i, j in zip(*np.nonzero(~present)):
        dp = pp - (i - c)
        dq = qq - (j - c)
        sel = np.hypot(dp, dq) <= EXTRAPOLATION_RADIUS
        if sel.sum() < need:
            continue
        coef = np.linalg.lstsq(_cubic_basis(dp[sel], dq[sel]), vv[sel], rcond=None)[0]
        out[i, j] = coef[0]
    return out


def spectrum_from_function(
    fgrid: FrequencyGrid, ell: int, fn, include_ring: bool = False, fill: str = "extrapolate"
) -> SpectrumTable:
    """Fill a table by calling ``fn(xi)`` on every in-band point (and the ring)."""
    t = SpectrumTable(fgrid, ell, fill)
    for pq in fgrid.band_points:
        t.set(pq, fn(FrequencyGrid.xi(pq)), IN_BAND)
    if include_ring:
        for pq in fgrid.ring_points:
            t.set(pq, fn(FrequencyGrid.xi(pq)), RING)
    return t


# --- transforms ---------------------------------------------------------------


def direct_fourier_many(f: ScalarField2D, xis) -> np.ndarray:
    """Trapezoid value of ``int c(x) exp(i x.xi) dx`` for each row of ``xis``."""
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    w = trapezoid_weights(f.grid)
    x = f.grid.coords
    ex = np.exp(1j * np.outer(x, xis[:, 0])) * w[:, None]
    ey = np.exp(1j * np.outer(x, xis[:, 1])) * w[:, None]
    inner = f.values @ ey  # (n_x, N)
    return np.einsum("in,in->n", ex, inner)


def direct_fourier(f: ScalarField2D, xi) -> complex:
    return complex(direct_fourier_many(f, [xi])[0])


def direct_fourier_table(f: ScalarField2D, fgrid: FrequencyGrid, ell: int = 0, dc: str = "synthetic") -> SpectrumTable:
    """In-band lattice transform of ``f`` with the origin filled per ``dc``.

    ``dc="synthetic"`` mimics the reconstruction (xi = 0 is never measured);
    ``dc="exact"`` stores the true volume integral instead.
    """
    t = SpectrumTable(fgrid, ell)
    pts = list(fgrid.band_points)
    if not pts:
        raise SpectralError(f"band of radius {fgrid.radius} holds no lattice points")
    vals = direct_fourier_many(f, [FrequencyGrid.xi(pq) for pq in pts])
    for pq, v in zip(pts, vals):
        t.set(pq, v, IN_BAND)
    if dc == "synthetic":
        t.synthesize_origin()
    elif dc == "exact":
        t.set((0, 0), direct_fourier(f, (0.0, 0.0)), SYNTHETIC)
    else:
        raise SpectralError(f"unknown dc mode {dc!r}")
    return t


def inverse_fourier_truncated(table: SpectrumTable, grid: Grid2D) -> ScalarField2D:
    """``c(x) = sum_{|xi| <= R} F(xi) exp(-i x.xi)`` over the stored band."""
    mask = table.band_mask()
    if not mask.any():
        raise SpectralError("empty band: nothing to invert")
    b = table._b
    coef = np.where(mask, table.values, 0)
    ks = LATTICE_STEP * np.arange(-b, b + 1)
    x = grid.coords
    e = np.exp(-1j * np.outer(x, ks))
    return ScalarField2D(grid, e @ coef @ e.T)


def band_limit(f: ScalarField2D, radius: float, dc: str = "synthetic") -> ScalarField2D:
    table = direct_fourier_table(f, FrequencyGrid(radius, margin=0), dc=dc)
    return inverse_fourier_truncated(table, f.grid)


# --- interpolation ------------------------------------------------------------


def _keys(t: np.ndarray) -> np.ndarray:
    """Keys cubic convolution kernel (a = -1/2)."""
    a = -0.5
    t = np.abs(t)
    out = np.zeros_like(t)
    near = t <= 1
    far = (t > 1) & (t < 2)
    out[near] = (a + 2) * t[near] ** 3 - (a + 3) * t[near] ** 2 + 1
    out[far] = a * t[far] ** 3 - 5 * a * t[far] ** 2 + 8 * a * t[far] - 4 * a
    return out


INTERPOLATION_ORDERS = ("bilinear", "bicubic")


def interpolate_spectrum(table: SpectrumTable, xi, order: str = "bilinear") -> complex:
    """Value of the tabulated spectrum at an arbitrary real frequency.

    Exact at lattice points.  Cells that straddle the band edge borrow the
    nearest stored node for each missing corner.
    """
    xi = np.asarray(xi)
    if np.iscomplexobj(xi):
        if np.any(xi.imag != 0):
            raise OutOfBandError(f"complex query frequency {xi}")
        xi = xi.real
    xi = xi.astype(float)
    if np.hypot(*xi) > table.fgrid.outer_radius * (1 + _BAND_RTOL):
        raise OutOfBandError(
            f"query |xi| = {np.hypot(*xi):.6g} beyond margined band {table.fgrid.outer_radius:.6g}"
        )
    s = xi / LATTICE_STEP
    r = np.round(s)
    if np.all(np.abs(s - r) < _SNAP_TOL):
        pq = (int(r[0]), int(r[1]))
        if table.has(pq):
            return table.get(pq)
    filled = table._filled
    off = table._b + 2
    if order == "bilinear":
        p0 = int(np.floor(s[0]))
        q0 = int(np.floor(s[1]))
        tx, ty = s[0] - p0, s[1] - q0
        v = filled[p0 + off : p0 + off + 2, q0 + off : q0 + off + 2]
        wx = np.array([1 - tx, tx])
        wy = np.array([1 - ty, ty])
        return complex(wx @ v @ wy)
    if order == "bicubic":
        p0 = int(np.floor(s[0]))
        q0 = int(np.floor(s[1]))
        tx, ty = s[0] - p0, s[1] - q0
        ix = p0 + off + np.arange(-1, 3)
        iy = q0 + off + np.arange(-1, 3)
        ix = np.clip(ix, 0, filled.shape[0] - 1)
        iy = np.clip(iy, 0, filled.shape[1] - 1)
        v = filled[np.ix_(ix, iy)]
        wx = _keys(tx - np.arange(-1, 3))
        wy = _keys(ty - np.arange(-1, 3))
        return complex(wx @ v @ wy)
    raise SpectralError(f"unknown interpolation order {order!r}")


# --- CSV ---------------------------------------------------------------------


def write_spectrum_csv(path, table: SpectrumTable) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["ell", "p", "q", "xi_x", "xi_y", "re", "im", "synthetic_flag"])
        for p, q, v, st in table.entries():
            xi = FrequencyGrid.xi((p, q))
            out.writerow([table.ell, p, q, repr(float(xi[0])), repr(float(xi[1])), repr(v.real), repr(v.imag), int(st == SYNTHETIC)])


def read_spectrum_csv(path, fgrid: FrequencyGrid, fill: str = "extrapolate") -> SpectrumTable:
    table = None
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            if table is None:
                table = SpectrumTable(fgrid, int(rec["ell"]), fill)
            pq = (int(rec["p"]), int(rec["q"]))
            if int(rec["synthetic_flag"]):
                st = SYNTHETIC
            else:
                st = IN_BAND if fgrid.in_band(*pq) else RING
            table.set(pq, complex(float(rec["re"]), float(rec["im"])), st)
    if table is None:
        raise SpectralError(f"{path}: empty spectrum file")
    return table

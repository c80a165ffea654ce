"""Inclusion-exclusion data d_ell(xi) from boundary measurements.

Two independent routes produce the same quantity:

* :func:`measure_d` simulates the experiment: plane-wave Dirichlet data, the
  nonlinear forward solve, and the Neumann difference ``du - du0`` paired
  with the test wave on the boundary;
* :func:`oracle_d` skips the PDE entirely and integrates
  ``phi * P(x, u0_S)`` over the square with analytic plane waves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial
from typing import Sequence

import numpy as np

from .boundary import (
    BoundaryGeometry,
    BoundaryTrace,
    boundary_geometry,
    boundary_integral,
    check_aligned,
    dirichlet_trace,
)
from .combinatorics import signed_subsets
from .grid import Grid2D, ScalarField2D, trapezoid_weights
from .solver import (
    ConvergenceError,
    HelmholtzOperator,
    PicardOptions,
    _poly,
    neumann_trace,
    picard_solve,
    plane_wave_field,
)
from .wavevectors import WaveVectorSet, build_wavevector_set

PROVENANCE = ("measured", "oracle")


class MeasurementError(RuntimeError):
    pass


def linearized_neumann(full: BoundaryTrace, background: BoundaryTrace) -> BoundaryTrace:
    """``du/dnu - du0/dnu``, the first-order stand-in for the linearized map."""
    check_aligned(full, background)
    return BoundaryTrace(full.geometry, full.values - background.values)


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    ell: int
    xi: tuple[float, float]
    subset: tuple[int, ...]
    dirichlet: BoundaryTrace = field(repr=False)
    linearized: BoundaryTrace = field(repr=False)
    provenance: str = "measured"

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass
class MeasureResult:
    value: complex
    records: list[MeasurementRecord]
    picard_iterations: list[int]


def _noisy(trace: BoundaryTrace, noise: float, rng: np.random.Generator | None) -> BoundaryTrace:
    if noise <= 0:
        return trace
    if rng is None:
        raise ValueError("a random generator is required when noise > 0")
    vals = trace.values
    rms = float(np.sqrt(np.mean(np.abs(vals) ** 2)))
    pert = rng.standard_normal(vals.shape) + 1j * rng.standard_normal(vals.shape)
    return BoundaryTrace(trace.geometry, vals + noise * rms * pert / np.sqrt(2))


def measure_d_detailed(
    ell: int,
    xi,
    op: HelmholtzOperator,
    c: Sequence[ScalarField2D],
    geometry: BoundaryGeometry | None = None,
    opts: PicardOptions | None = None,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> MeasureResult:
    grid = op.grid
    geometry = geometry or boundary_geometry(grid)
    wv = build_wavevector_set(ell, xi, op.k)
    f0 = dirichlet_trace(plane_wave_field(grid, wv.zeta0), geometry)
    fj = [dirichlet_trace(plane_wave_field(grid, z), geometry) for z in wv.zetas]
    subsets = signed_subsets(ell)
    f_sets = []
    for s in subsets:
        acc = fj[s.members[0] - 1]
        for j in s.members[1:]:
            acc = acc + fj[j - 1]
        f_sets.append(acc)
    try:
        res = picard_solve(op, c, f_sets, opts)
    except ConvergenceError as exc:
        raise MeasurementError(
            f"forward solve failed for ell={ell}, xi=({xi[0]:.6g}, {xi[1]:.6g}), "
            f"subsets={[s.members for s in subsets]}: {exc}"
        ) from exc
    total = 0j
    records = []
    for s, f_s, u, u0 in zip(subsets, f_sets, res.fields, res.background):
        full = _noisy(neumann_trace(u, geometry), noise, rng)
        lin = linearized_neumann(full, neumann_trace(u0, geometry))
        total += s.sign * boundary_integral(f0, lin)
        records.append(MeasurementRecord(ell, (float(xi[0]), float(xi[1])), s.members, f_s, lin))
    return MeasureResult(total / factorial(ell), records, res.iterations)


def measure_d(
    ell: int,
    xi,
    op: HelmholtzOperator,
    c: Sequence[ScalarField2D],
    geometry: BoundaryGeometry | None = None,
    opts: PicardOptions | None = None,
) -> complex:
    return measure_d_detailed(ell, xi, op, c, geometry, opts).value


def oracle_d(
    ell: int,
    xi,
    k: float,
    c: Sequence[ScalarField2D],
    grid: Grid2D | None = None,
    wv: WaveVectorSet | None = None,
) -> complex:
    """Volume-quadrature value of d_ell(xi) with analytic plane waves.

    ``(1/ell!) sum_S sign(S) * Q[ exp(i x.zeta_0) * P(x, sum_{j in S} exp(i x.zeta_j)) ]``
    where ``Q`` is the trapezoid rule on ``grid``.
    """
    if not c:
        raise ValueError("need at least one coefficient field")
    grid = grid or c[0].grid
    if any(f.grid != grid for f in c):
        raise ValueError("coefficients must be sampled on the oracle grid")
    wv = wv or build_wavevector_set(ell, xi, k)
    coeffs = np.stack([f.values for f in c])
    w = trapezoid_weights(grid)
    phi = plane_wave_field(grid, wv.zeta0).values
    waves = [plane_wave_field(grid, z).values for z in wv.zetas]
    total = 0j
    for s in signed_subsets(ell):
        u0 = waves[s.members[0] - 1]
        for j in s.members[1:]:
            u0 = u0 + waves[j - 1]
        total += s.sign * complex(w @ (phi * _poly(coeffs, u0)) @ w)
    return total / factorial(ell)


def write_measurements_csv(path, rows) -> None:
    """``rows``: iterable of ``(ell, xi_x, xi_y, value, provenance)``."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["ell", "xi_x", "xi_y", "re", "im", "provenance"])
        for ell, xx, xy, val, prov in rows:
            out.writerow([ell, repr(float(xx)), repr(float(xy)), repr(val.real), repr(val.imag), prov])


def read_measurements_csv(path) -> list[tuple[int, float, float, complex, str]]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                (
                    int(rec["ell"]),
                    float(rec["xi_x"]),
                    float(rec["xi_y"]),
                    complex(float(rec["re"]), float(rec["im"])),
                    rec["provenance"],
                )
            )
    return rows

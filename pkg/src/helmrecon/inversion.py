"""Recursive back-substitution from data tables to coefficient spectra.

The data at level ``ell`` mix ``F[c_ell]`` with shifted copies of the
higher spectra::

    d_ell(xi) = F[c_ell](xi)
                + sum_{a>=1} sum_{|alpha|=a} w(ell, a, alpha) F[c_{ell+a}](xi + sum alpha_j zeta_j)

so the top level is read off directly and each lower level subtracts
interpolated values of the spectra already recovered.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .boundary import boundary_geometry
from .combinatorics import enumerate_multi_indices, multinomial_weight
from .grid import ScalarField2D, check_same_grid
from .measurement import measure_d_detailed, oracle_d
from .solver import HelmholtzOperator, PicardOptions
from .spectral import (
    FILL_POLICIES,
    INTERPOLATION_ORDERS,
    IN_BAND,
    RING,
    FrequencyGrid,
    OutOfBandError,
    SpectrumTable,
    band_limit,
    interpolate_spectrum,
    inverse_fourier_truncated,
)
from .wavevectors import build_wavevector_set

SOURCES = ("oracle", "measured")

# ring nodes beyond the real band are only evaluated while every plane wave
# stays within a factor e of unit modulus on the square
RING_GROWTH_CAP = 1.0


class InversionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReconstructionPlan:
    m: int
    k: float
    source: str = "oracle"
    interpolation: str = "bilinear"
    margin: int = 2
    fill: str = "extrapolate"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.interpolation not in INTERPOLATION_ORDERS:
            raise ValueError(f"interpolation must be one of {INTERPOLATION_ORDERS}")
        if self.fill not in FILL_POLICIES:
            raise ValueError(f"fill must be one of {FILL_POLICIES}")

    def band_radius(self, ell: int) -> float:
        return (ell + 1) * self.k

    def frequency_grid(self, ell: int) -> FrequencyGrid:
        return FrequencyGrid(self.band_radius(ell), self.margin)

    @property
    def levels(self) -> range:
        return range(1, self.m + 1)


class L2Error(NamedTuple):
    """Relative L2 error, or the absolute norm when ``absolute`` is set."""

    value: float
    absolute: bool = False

    def __float__(self) -> float:
        return self.value


def relative_l2_error(recon: ScalarField2D, reference: ScalarField2D) -> L2Error:
    check_same_grid(recon, reference)
    num = float(np.linalg.norm(recon.values - reference.values))
    den = float(np.linalg.norm(reference.values))
    if den == 0.0:
        return L2Error(num, True)
    return L2Error(num / den, False)


def _growth(wv) -> float:
    # max over the square of |exp(i x.zeta)| is exp(0.5 (|Im zx| + |Im zy|))
    return max(0.5 * float(np.sum(np.abs(z.imag))) for z in (wv.zeta0,) + wv.zetas)


def ring_points(plan: ReconstructionPlan, ell: int) -> list[tuple[int, int]]:
    """Margin nodes of level ``ell`` whose wave-vector sets respect the growth cap."""
    out = []
    for pq in plan.frequency_grid(ell).ring_points:
        wv = build_wavevector_set(ell, FrequencyGrid.xi(pq), plan.k)
        if _growth(wv) <= RING_GROWTH_CAP:
            out.append(pq)
    return out


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _correct_one(ell, xi, d_value, recovered, plan) -> complex:
    wv = build_wavevector_set(ell, xi, plan.k)
    val = d_value
    for a in range(1, plan.m - ell + 1):
        table = recovered[ell + a]
        for alpha in enumerate_multi_indices(ell, a):
            eta = wv.shift(alpha)
            try:
                v = interpolate_spectrum(table, eta, plan.interpolation)
            except OutOfBandError as exc:
                raise InversionError(
                    f"shifted query out of band at ell={ell}, xi=({xi[0]:.6g}, {xi[1]:.6g}), alpha={alpha}: {exc}"
                ) from exc
            val -= float(multinomial_weight(ell, a, alpha)) * v
    return val


def back_substitute(
    d_tables: dict[int, SpectrumTable],
    plan: ReconstructionPlan,
    workers: int = 1,
) -> dict[int, SpectrumTable]:
    """Recover ``F[c_ell]`` for ``ell = m, ..., 1``.

    The returned tables carry a synthetic xi = 0 value so that shifted
    queries landing next to the origin can be interpolated.
    """
    missing = [ell for ell in plan.levels if ell not in d_tables]
    if missing:
        raise InversionError(f"missing data tables for levels {missing}")
    recovered: dict[int, SpectrumTable] = {}
    top = d_tables[plan.m].copy()
    top.fill = plan.fill
    top.synthesize_origin()
    recovered[plan.m] = top
    for ell in range(plan.m - 1, 0, -1):
        d = d_tables[ell]
        pts = list(plan.frequency_grid(ell).band_points)

        def one(pq, ell=ell, d=d):
            return _correct_one(ell, FrequencyGrid.xi(pq), d.get(pq), recovered, plan)

        vals = _map(one, pts, workers)
        out = SpectrumTable(plan.frequency_grid(ell), ell, plan.fill)
        for pq, v in zip(pts, vals):
            out.set(pq, v, IN_BAND)
        out.synthesize_origin()
        recovered[ell] = out
    return recovered


@dataclass
class ForwardSetup:
    """What the measured-data path needs: operator and truth on the forward grid."""

    op: HelmholtzOperator
    truth: Sequence[ScalarField2D]
    picard: PicardOptions = field(default_factory=PicardOptions)
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.truth:
            g = check_same_grid(*self.truth)
            if g != self.op.grid:
                raise ValueError("forward truth must live on the operator grid")


@dataclass
class ReconstructionResult:
    plan: ReconstructionPlan
    data: dict[int, SpectrumTable]
    spectra: dict[int, SpectrumTable]
    fields: dict[int, ScalarField2D]
    naive_fields: dict[int, ScalarField2D]
    references: dict[int, ScalarField2D]
    errors: dict[int, L2Error]
    naive_errors: dict[int, L2Error]
    full_errors: dict[int, L2Error]
    diagnostics: dict = field(default_factory=dict)


def expected_solve_count(points_per_level: dict[int, int]) -> int:
    """``sum_ell (2^ell - 1) N_ell`` nonlinear forward problems."""
    return sum((2**ell - 1) * n for ell, n in points_per_level.items())


def build_data_tables(
    plan: ReconstructionPlan,
    truth: Sequence[ScalarField2D],
    forward: ForwardSetup | None = None,
    workers: int = 1,
    progress: Callable[[str], None] | None = None,
) -> tuple[dict[int, SpectrumTable], dict]:
    """Evaluate ``d_ell`` on every level's band (plus capped ring for ``ell = m``)."""
    if plan.source == "measured" and forward is None:
        raise InversionError("measured data need a forward setup")
    tables: dict[int, SpectrumTable] = {}
    counts: dict[int, int] = {}
    picard_iters: list[int] = []
    lin_before = forward.op.solve_count if forward else 0
    geometry = boundary_geometry(forward.op.grid) if forward else None
    for ell in plan.levels:
        band = list(plan.frequency_grid(ell).band_points)
        ring = ring_points(plan, ell) if ell == plan.m else []
        pts = [(pq, IN_BAND) for pq in band] + [(pq, RING) for pq in ring]
        if plan.source == "oracle":
            grid = truth[0].grid

            def one(item, ell=ell, grid=grid):
                return oracle_d(ell, FrequencyGrid.xi(item[0]), plan.k, truth, grid), []
        else:

            def one(item, ell=ell):
                pq = item[0]
                rng = np.random.default_rng([forward.seed, ell, pq[0] + 1000, pq[1] + 1000])
                res = measure_d_detailed(
                    ell,
                    FrequencyGrid.xi(pq),
                    forward.op,
                    forward.truth,
                    geometry,
                    forward.picard,
                    noise=forward.noise,
                    rng=rng,
                )
                return res.value, res.picard_iterations

        results = _map(one, pts, workers)
        table = SpectrumTable(plan.frequency_grid(ell), ell)
        for (pq, st), (v, its) in zip(pts, results):
            table.set(pq, v, st)
            picard_iters.extend(its)
        tables[ell] = table
        counts[ell] = len(pts)
        if progress:
            progress(f"level {ell}: {len(pts)} frequencies ({len(ring)} ring)")
    diag = {"points_per_level": counts}
    if plan.source == "measured":
        diag["forward_solves"] = expected_solve_count(counts)
        diag["linear_solves"] = forward.op.solve_count - lin_before
        diag["picard_iterations_max"] = max(picard_iters) if picard_iters else 0
        diag["picard_iterations_mean"] = float(np.mean(picard_iters)) if picard_iters else 0.0
    else:
        diag["forward_solves"] = 0
        diag["linear_solves"] = 0
    return tables, diag


def _naive_table(d: SpectrumTable) -> SpectrumTable:
    t = d.copy()
    t.synthesize_origin()
    return t


def reconstruct(
    plan: ReconstructionPlan,
    truth: Sequence[ScalarField2D],
    forward: ForwardSetup | None = None,
    workers: int = 1,
    progress: Callable[[str], None] | None = None,
) -> ReconstructionResult:
    """Data, back-substitution, synthesis and error metrics in one call.

    ``truth`` holds ``c_1..c_m`` on the inverse grid; it feeds the oracle
    data (in oracle mode) and the band-limited references.
    """
    if len(truth) != plan.m:
        raise InversionError(f"expected {plan.m} truth fields, got {len(truth)}")
    check_same_grid(*truth)
    t0 = time.perf_counter()
    data, diag = build_data_tables(plan, truth, forward, workers, progress)
    t1 = time.perf_counter()
    spectra = back_substitute(data, plan, workers)
    t2 = time.perf_counter()
    result = synthesize(plan, data, spectra, truth, diag)
    diag["timings"] = {"data": t1 - t0, "back_substitution": t2 - t1, "synthesis": time.perf_counter() - t2}
    return result


def synthesize(
    plan: ReconstructionPlan,
    data: dict[int, SpectrumTable],
    spectra: dict[int, SpectrumTable],
    truth: Sequence[ScalarField2D],
    diagnostics: dict | None = None,
) -> ReconstructionResult:
    """Corrected and naive fields plus their errors against the band-limited truth."""
    grid = check_same_grid(*truth)
    fields, naive, refs = {}, {}, {}
    errs, naive_errs, full_errs = {}, {}, {}
    for ell in plan.levels:
        fields[ell] = inverse_fourier_truncated(spectra[ell], grid)
        naive[ell] = inverse_fourier_truncated(_naive_table(data[ell]), grid)
        refs[ell] = band_limit(truth[ell - 1], plan.band_radius(ell))
        errs[ell] = relative_l2_error(fields[ell], refs[ell])
        naive_errs[ell] = relative_l2_error(naive[ell], refs[ell])
        full_errs[ell] = relative_l2_error(fields[ell], truth[ell - 1])
    return ReconstructionResult(
        plan, data, spectra, fields, naive, refs, errs, naive_errs, full_errs, diagnostics if diagnostics is not None else {}
    )

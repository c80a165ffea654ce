"""Self-check batteries reported as pass/fail lines (``helmrecon verify``)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .combinatorics import pie_closed_form, pie_evaluate
from .grid import Bump, Grid2D, SupportSpec, synth_coefficient
from .measurement import measure_d, oracle_d
from .solver import assemble_operator, plane_wave_field, solve_linear
from .boundary import dirichlet_trace
from .spectral import (
    FrequencyGrid,
    band_limit,
    direct_fourier_table,
    interpolate_spectrum,
    inverse_fourier_truncated,
)
from .wavevectors import build_wavevector_set

CHECKS = ("pie", "zeta", "solver", "spectral", "scaling")


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: str
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.value:.3e} (tolerance {self.tolerance}) {self.detail}".rstrip()


def check_pie(seed: int = 0, trials: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for ell in range(1, 6):
        for lp in range(1, ell + 4):
            for _ in range(trials):
                r = rng.uniform(0, 2, ell)
                w = r * np.exp(1j * rng.uniform(0, 2 * np.pi, ell))
                lhs = pie_evaluate(ell, lp, w)
                rhs = pie_closed_form(ell, lp, w)
                scale = max(abs(rhs), float(np.max(np.abs(w))) ** lp, 1e-300)
                worst = max(worst, abs(lhs - rhs) / scale)
    return CheckResult("pie", worst <= 1e-10, worst, "<= 1e-10", "inclusion-exclusion identity, ell 1..5")


def check_zeta(seed: int = 0, trials: int = 200) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    real_ok = True
    for _ in range(trials):
        ell = int(rng.integers(1, 6))
        k = float(rng.choice([1.5, 5.0, 20.0]))
        radius = (ell + 1) * k * np.sqrt(rng.uniform(1e-6, 1.0))
        ang = rng.uniform(0, 2 * np.pi)
        xi = radius * np.array([np.cos(ang), np.sin(ang)])
        wv = build_wavevector_set(ell, xi, k)
        dots, total = wv.constraint_residuals()
        worst = max(worst, dots / k**2, total / k)
        real_ok &= wv.is_real
    return CheckResult(
        "zeta",
        worst <= 1e-12 and real_ok,
        worst,
        "<= 1e-12 (scaled)",
        "" if real_ok else "an in-band set was complex",
    )


def plane_wave_errors(k: float = 10.0, sizes=(51, 101, 201)) -> list[float]:
    """Sup error of the discrete Dirichlet solve against an exact plane wave."""
    zeta = k * np.array([np.cos(0.3), np.sin(0.3)])
    errs = []
    for n in sizes:
        g = Grid2D(n)
        exact = plane_wave_field(g, zeta)
        u = solve_linear(assemble_operator(g, k), None, dirichlet_trace(exact))
        errs.append(float(np.max(np.abs(u.values - exact.values))))
    return errs


def check_solver() -> CheckResult:
    e = plane_wave_errors()
    ratios = [e[0] / e[1], e[1] / e[2]]
    ok = all(3.4 <= r <= 4.6 for r in ratios)
    return CheckResult("solver", ok, min(ratios), "ratios in [3.4, 4.6]", f"ratios {ratios[0]:.3f}, {ratios[1]:.3f}")


def check_spectral() -> CheckResult:
    g = Grid2D(101)
    f = synth_coefficient(g, [Bump((0.03, 0.0), 1.0, 0.2)])
    R = 30.0
    once = band_limit(f, R)
    twice = band_limit(once, R)
    idem = float(np.linalg.norm(twice.values - once.values) / np.linalg.norm(once.values))
    table = direct_fourier_table(f, FrequencyGrid(R))
    herm = max(
        abs(table.get((-p, -q)) - np.conj(table.get((p, q)))) for p, q in FrequencyGrid(R).band_points
    )
    exact = max(
        abs(interpolate_spectrum(table, FrequencyGrid.xi(pq)) - table.get(pq)) for pq in FrequencyGrid(R).band_points
    )
    worst = max(idem, herm, exact)
    return CheckResult(
        "spectral",
        idem <= 1e-12 and herm <= 1e-12 and exact == 0.0,
        worst,
        "<= 1e-12",
        f"idempotence {idem:.1e}, hermitian {herm:.1e}, lattice exactness {exact:.1e}",
    )


def linearization_gap(amplitude: float, n: int = 101, k: float = 10.0) -> float:
    """``max_xi |measure_d - oracle_d|`` for the default two-coefficient truth."""
    from .config import DEFAULT_BUMPS

    g = Grid2D(n)
    op = assemble_operator(g, k)
    c = [
        synth_coefficient(g, [Bump((x, y), a * amplitude, w) for x, y, a, w in DEFAULT_BUMPS[ell]])
        for ell in (1, 2)
    ]
    worst = 0.0
    for ell in (1, 2):
        for pq in FrequencyGrid((ell + 1) * k).band_points:
            xi = FrequencyGrid.xi(pq)
            worst = max(worst, abs(measure_d(ell, xi, op, c) - oracle_d(ell, xi, k, c)))
    return worst


def check_scaling() -> CheckResult:
    d1 = linearization_gap(0.25)
    d2 = linearization_gap(0.125)
    ratio = d1 / d2
    return CheckResult(
        "scaling", 3.2 <= ratio <= 4.8, ratio, "in [3.2, 4.8]", f"D(0.25)={d1:.3e}, D(0.125)={d2:.3e}"
    )


_RUNNERS: dict[str, Callable[[], CheckResult]] = {
    "pie": check_pie,
    "zeta": check_zeta,
    "solver": check_solver,
    "spectral": check_spectral,
    "scaling": check_scaling,
}


def verify_suite(selection: Iterable[str]) -> list[CheckResult]:
    sel = list(selection)
    unknown = [s for s in sel if s not in _RUNNERS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {CHECKS}")
    return [_RUNNERS[s]() for s in CHECKS if s in sel]

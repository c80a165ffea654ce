from math import factorial

import numpy as np
import pytest

from helmrecon.boundary import BoundaryTrace, boundary_geometry, boundary_integral, dirichlet_trace
from helmrecon.grid import Grid2D, ScalarField2D
from helmrecon.measurement import (
    MeasurementError,
    MeasurementRecord,
    linearized_neumann,
    measure_d,
    measure_d_detailed,
    oracle_d,
    read_measurements_csv,
    write_measurements_csv,
)
from helmrecon.solver import PicardOptions, assemble_operator, neumann_trace, picard_solve, plane_wave_field
from helmrecon.spectral import FrequencyGrid, direct_fourier
from helmrecon.wavevectors import build_wavevector_set

from conftest import default_truth

K = 10.0


@pytest.fixture(scope="module")
def small():
    g = Grid2D(61)
    return g, assemble_operator(g, K)


def test_linearized_neumann_zero_when_equal():
    geo = boundary_geometry(Grid2D(7))
    t = BoundaryTrace(geo, np.arange(len(geo)) * 1j)
    assert not np.any(linearized_neumann(t, t).values)


def test_zero_coefficients_give_zero_data(small):
    g, op = small
    zero = [ScalarField2D.zeros(g)] * 2
    for ell in (1, 2):
        for pq in FrequencyGrid((ell + 1) * K).band_points[::5]:
            assert abs(measure_d(ell, FrequencyGrid.xi(pq), op, zero)) <= 1e-8


def test_level_one_is_single_boundary_pairing(small):
    g, op = small
    c = default_truth(g, 2, 0.25)
    xi = np.array([2 * np.pi, 4 * np.pi])
    wv = build_wavevector_set(1, xi, K)
    f0 = dirichlet_trace(plane_wave_field(g, wv.zeta0))
    f1 = dirichlet_trace(plane_wave_field(g, wv.zetas[0]))
    res = picard_solve(op, c, [f1])
    lin = neumann_trace(res.fields[0]).values - neumann_trace(res.background[0]).values
    manual = boundary_integral(f0, BoundaryTrace(f0.geometry, lin))
    detailed = measure_d_detailed(1, xi, op, c)
    assert len(detailed.records) == 1 and detailed.records[0].subset == (1,)
    assert detailed.value == manual


def test_measurement_records_tagged(small):
    g, op = small
    out = measure_d_detailed(2, (6.0, 3.0), op, default_truth(g, 2, 0.25))
    assert [r.subset for r in out.records] == [(1,), (2,), (1, 2)]
    assert all(r.provenance == "measured" for r in out.records)
    with pytest.raises(ValueError):
        MeasurementRecord(1, (0.0, 1.0), (1,), out.records[0].dirichlet, out.records[0].linearized, "guess")


def test_measure_deterministic(small):
    g, op = small
    c = default_truth(g, 2, 0.25)
    a = measure_d(2, (9.0, -4.0), op, c)
    b = measure_d(2, (9.0, -4.0), op, c)
    assert a == b


def test_linearized_trace_scales_linearly(small):
    g, op = small
    xi = np.array([4.0, 7.0])
    wv = build_wavevector_set(1, xi, K)
    f = dirichlet_trace(plane_wave_field(g, wv.zetas[0]))

    def lin(s):
        res = picard_solve(op, default_truth(g, 2, s), [f])
        return np.linalg.norm(neumann_trace(res.fields[0]).values - neumann_trace(res.background[0]).values)

    assert lin(0.02) / lin(0.01) == pytest.approx(2.0, rel=0.02)


def test_measured_close_to_oracle_for_small_coefficients():
    g = Grid2D(101)
    op = assemble_operator(g, K)
    c = default_truth(g, 2, 0.05)
    worst = 0.0
    for pq in FrequencyGrid(3 * K).band_points[::4]:
        xi = FrequencyGrid.xi(pq)
        o = oracle_d(2, xi, K, c)
        worst = max(worst, abs(measure_d(2, xi, op, c) - o) / abs(o))
    assert worst < 0.25


def test_nonconvergence_annotated(small):
    g, op = small
    from helmrecon.grid import Bump, synth_coefficient

    c = [synth_coefficient(g, [Bump((0, 0), 500.0, 0.3)])]
    with pytest.raises(MeasurementError, match=r"ell=1, xi=\(.*subsets="):
        measure_d(1, (5.0, 5.0), op, c, opts=PicardOptions(max_iters=5))


def test_noise_requires_generator(small):
    g, op = small
    with pytest.raises(ValueError):
        measure_d_detailed(1, (5.0, 5.0), op, default_truth(g, 2, 0.1), noise=0.01)


def test_noise_reproducible_with_seed(small):
    g, op = small
    c = default_truth(g, 2, 0.1)
    a = measure_d_detailed(1, (5.0, 5.0), op, c, noise=0.01, rng=np.random.default_rng(3)).value
    b = measure_d_detailed(1, (5.0, 5.0), op, c, noise=0.01, rng=np.random.default_rng(3)).value
    clean = measure_d(1, (5.0, 5.0), op, c)
    assert a == b and a != clean


def test_oracle_zero_is_exactly_zero():
    g = Grid2D(41)
    assert oracle_d(3, (5.0, 2.0), K, [ScalarField2D.zeros(g)] * 3) == 0


@pytest.mark.parametrize("m", [2, 3])
def test_oracle_top_level_is_fourier_mode(m):
    g = Grid2D(101)
    c = default_truth(g, m)
    for pq in FrequencyGrid((m + 1) * K).band_points[::7]:
        xi = FrequencyGrid.xi(pq)
        assert abs(oracle_d(m, xi, K, c) - direct_fourier(c[m - 1], xi)) <= 1e-10


def test_oracle_level_one_two_coefficients():
    g = Grid2D(101)
    c = default_truth(g, 2)
    for pq in FrequencyGrid(2 * K).band_points[::3]:
        xi = FrequencyGrid.xi(pq)
        z = build_wavevector_set(1, xi, K).zetas[0].real
        expect = direct_fourier(c[0], xi) + direct_fourier(c[1], xi + z)
        assert abs(oracle_d(1, xi, K, c) - expect) <= 1e-10


@pytest.mark.parametrize("ell", [1, 2, 3])
def test_oracle_conjugate_symmetry(ell):
    g = Grid2D(81)
    c = default_truth(g, 3)
    for pq in FrequencyGrid((ell + 1) * K).band_points[::9]:
        xi = FrequencyGrid.xi(pq)
        a = oracle_d(ell, xi, K, c)
        b = oracle_d(ell, -xi, K, c)
        assert abs(b - np.conj(a)) <= 1e-12 * max(1.0, abs(a))


def test_oracle_requires_shared_grid():
    with pytest.raises(ValueError):
        oracle_d(1, (1.0, 1.0), K, [ScalarField2D.zeros(Grid2D(11))], Grid2D(13))


def test_measurement_csv_roundtrip(tmp_path):
    rows = [(1, 6.283185307179586, -0.0, 1e-3 + 2e-17j, "oracle"), (2, 0.1, 0.2, -3.5j, "measured")]
    p = tmp_path / "m.csv"
    write_measurements_csv(p, rows)
    assert p.read_text().splitlines()[0] == "ell,xi_x,xi_y,re,im,provenance"
    assert read_measurements_csv(p) == rows

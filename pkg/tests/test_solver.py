import threading

import numpy as np
import pytest

from helmrecon.boundary import boundary_geometry, dirichlet_trace
from helmrecon.grid import Bump, Grid2D, ScalarField2D, synth_coefficient
from helmrecon.solver import (
    ConvergenceError,
    PicardOptions,
    ResonanceError,
    assemble_operator,
    evaluate_polynomial,
    laplacian_eigenvalue,
    neumann_trace,
    nonlinear_residual,
    picard_solve,
    plane_wave_field,
    solve_linear,
    solve_nonlinear,
)
from helmrecon.verify import plane_wave_errors


def test_paper_wavenumber_assembles():
    op = assemble_operator(Grid2D(201), 20.0)
    assert op.min_pivot_ratio > 1e-10


def test_resonant_wavenumber_detected():
    g = Grid2D(21)
    k = np.sqrt(laplacian_eigenvalue(g, 2, 1))
    with pytest.raises(ResonanceError, match="perturb"):
        assemble_operator(g, k)


def test_near_resonant_wavenumber_passes_with_perturbation():
    g = Grid2D(21)
    k = np.sqrt(laplacian_eigenvalue(g, 2, 1))
    assemble_operator(g, k + 1e-3)


def test_invalid_wavenumber():
    with pytest.raises(ValueError):
        assemble_operator(Grid2D(11), 0.0)


def test_stencil_reproduces_rhs(rng):
    g = Grid2D(41)
    op = assemble_operator(g, 7.3)
    src = ScalarField2D(g, rng.standard_normal((41, 41)) + 1j * rng.standard_normal((41, 41)))
    bnd = dirichlet_trace(ScalarField2D(g, rng.standard_normal((41, 41))))
    u = solve_linear(op, src, bnd)
    res = op.apply(u) - src.values[1:-1, 1:-1]
    # full right-hand side of the interior system includes the lifted boundary data
    full_rhs = src.values[1:-1, 1:-1] + op.boundary_rhs(u.values)
    assert np.linalg.norm(res) <= 1e-12 * np.linalg.norm(full_rhs)
    assert np.array_equal(dirichlet_trace(u).values, bnd.values)


def test_factorization_reuse_bitwise(rng):
    g = Grid2D(25)
    k = 6.1
    op = assemble_operator(g, k)
    traces = [dirichlet_trace(ScalarField2D(g, rng.standard_normal((25, 25)))) for _ in range(100)]
    for tr in traces:
        a = solve_linear(op, None, tr)
        b = solve_linear(assemble_operator(g, k), None, tr)
        assert np.array_equal(a.values, b.values)


def test_threaded_solves_match_owner(rng):
    g = Grid2D(31)
    op = assemble_operator(g, 5.0)
    tr = dirichlet_trace(ScalarField2D(g, rng.standard_normal((31, 31))))
    ref = solve_linear(op, None, tr).values
    out = {}

    def work():
        out["v"] = solve_linear(op, None, tr).values

    t = threading.Thread(target=work)
    t.start()
    t.join()
    assert np.array_equal(out["v"], ref)


def test_plane_wave_second_order():
    e = plane_wave_errors(10.0, (51, 101, 201))
    ratios = [e[0] / e[1], e[1] / e[2]]
    assert all(3.4 <= r <= 4.6 for r in ratios), ratios


def test_plane_wave_is_exact_continuum_solution():
    zeta = np.array([3.0 + 1j, 0.0])
    zeta[1] = np.sqrt(25.0 - zeta[0] ** 2)
    g = Grid2D(11)
    pw = plane_wave_field(g, zeta)
    assert np.allclose(pw.values[3, 4], np.exp(1j * (g.coords[3] * zeta[0] + g.coords[4] * zeta[1])))


def test_evaluate_polynomial_matches_direct(rng):
    g = Grid2D(7)
    c = [ScalarField2D(g, rng.standard_normal((7, 7))) for _ in range(3)]
    u = ScalarField2D(g, rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7)))
    direct = sum(cl.values * u.values ** (l + 1) for l, cl in enumerate(c))
    assert np.allclose(evaluate_polynomial(c, u).values, direct, rtol=1e-13, atol=1e-13)
    assert not np.any(evaluate_polynomial([], u).values)


def _truth(g, amp):
    return [
        synth_coefficient(g, [Bump((0.03, 0.0), amp, 0.2)]),
        synth_coefficient(g, [Bump((-0.03, 0.03), amp, 0.12)]),
    ]


def test_picard_fixed_point_residual():
    g = Grid2D(61)
    op = assemble_operator(g, 10.0)
    opts = PicardOptions(rel_tol=1e-10)
    c = _truth(g, 0.25)
    f = dirichlet_trace(plane_wave_field(g, (6.0, 8.0)))
    u = solve_nonlinear(op, c, f, opts)
    res = nonlinear_residual(op, c, u)
    assert np.linalg.norm(res) <= 10 * opts.rel_tol * np.linalg.norm(u.values)


def test_picard_batch_equals_single_solves():
    g = Grid2D(41)
    op = assemble_operator(g, 10.0)
    c = _truth(g, 0.25)
    fs = [dirichlet_trace(plane_wave_field(g, z)) for z in ((10.0, 0.0), (6.0, 8.0), (0.0, -10.0))]
    batch = picard_solve(op, c, fs)
    for f, u in zip(fs, batch.fields):
        assert np.array_equal(solve_nonlinear(op, c, f).values, u.values)


def test_picard_zero_coefficients_is_linear_solve():
    g = Grid2D(31)
    op = assemble_operator(g, 10.0)
    f = dirichlet_trace(plane_wave_field(g, (8.0, 6.0)))
    res = picard_solve(op, [ScalarField2D.zeros(g)] * 2, [f])
    assert np.array_equal(res.fields[0].values, res.background[0].values)
    assert res.iterations == [1]


def test_picard_divergence_reported():
    g = Grid2D(31)
    op = assemble_operator(g, 10.0)
    c = [synth_coefficient(g, [Bump((0, 0), 400.0, 0.3)])]
    f = dirichlet_trace(plane_wave_field(g, (10.0, 0.0)))
    with pytest.raises(ConvergenceError) as info:
        solve_nonlinear(op, c, f, PicardOptions(max_iters=20))
    assert info.value.iterations >= 1


def test_picard_options_validated():
    with pytest.raises(ValueError):
        PicardOptions(rel_tol=0.0)
    with pytest.raises(ValueError):
        PicardOptions(max_iters=0)


def test_neumann_constant_is_zero():
    g = Grid2D(9)
    tr = neumann_trace(ScalarField2D(g, np.full((9, 9), 3.0 + 1j)))
    assert np.allclose(tr.values, 0, atol=1e-12)


def test_neumann_affine_exact_on_right_edge():
    g = Grid2D(13)
    X, _ = g.mesh()
    tr = neumann_trace(ScalarField2D(g, X))
    geo = tr.geometry
    right = (geo.index[:, 0] == 12) & ~geo.corner
    assert np.allclose(tr.values[right], 1.0, atol=1e-12)
    left = (geo.index[:, 0] == 0) & ~geo.corner
    assert np.allclose(tr.values[left], -1.0, atol=1e-12)


def test_neumann_needs_four_points():
    with pytest.raises(Exception):
        neumann_trace(ScalarField2D.zeros(Grid2D(3)))


def test_neumann_plane_wave_second_order():
    zeta = np.array([6.0, 8.0])
    errs = []
    for n in (41, 81, 161):
        g = Grid2D(n)
        geo = boundary_geometry(g)
        u = plane_wave_field(g, zeta)
        tr = neumann_trace(u, geo)
        pts = geo.points
        # corners average the two edge derivatives
        nrm = np.where(geo.corner[:, None], np.sign(pts) * 0.5, geo.normals)
        exact = 1j * (nrm @ zeta) * np.exp(1j * pts @ zeta)
        errs.append(np.max(np.abs(tr.values - exact)))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.4 <= r <= 4.6 for r in ratios), ratios

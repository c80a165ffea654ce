"""Finite-difference Helmholtz solver on the unit square.

The interior 5-point stencil of ``Delta + k^2`` is assembled once per
``(grid, k)`` and LU-factorised with SuperLU.  Boundary values are eliminated
into the right-hand side.  SuperLU handles are not shared between threads:
each worker thread lazily factorises its own copy of the same matrix, which
gives bitwise-identical solves.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary import BoundaryGeometry, BoundaryTrace, boundary_geometry
from .grid import Grid2D, GridError, ScalarField2D, check_same_grid

RESONANCE_TOL = 1e-10


class ResonanceError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, last_update: float, iterations: int):
        super().__init__(message)
        self.last_update = last_update
        self.iterations = iterations


def laplacian_eigenvalue(grid: Grid2D, p: int, q: int) -> float:
    """Dirichlet eigenvalue of ``-Delta_h`` for mode ``(p, q)``."""
    h = grid.h
    return 4.0 / h**2 * (np.sin(p * np.pi * h / 2) ** 2 + np.sin(q * np.pi * h / 2) ** 2)


def _interior_matrix(n_int: int, h: float, k: float) -> sp.csc_matrix:
    lap1 = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n_int, n_int)) / h**2
    eye = sp.identity(n_int)
    mat = sp.kron(lap1, eye) + sp.kron(eye, lap1) + k * k * sp.identity(n_int * n_int)
    return mat.tocsc().astype(complex)


class HelmholtzOperator:
    """Factorised interior operator for one ``(grid, k)`` pair."""

    def __init__(self, grid: Grid2D, k: float):
        if k <= 0:
            raise ValueError(f"wavenumber must be positive, got {k}")
        self.grid = grid
        self.k = float(k)
        self.n_int = grid.n - 2
        self.matrix = _interior_matrix(self.n_int, grid.h, self.k)
        self.matrix.sort_indices()
        self.scale = float(abs(self.matrix).max())
        lu = spla.splu(self.matrix)
        pivot = float(np.min(np.abs(lu.U.diagonal())))
        self.min_pivot_ratio = pivot / self.scale
        if self.min_pivot_ratio < RESONANCE_TOL:
            raise ResonanceError(
                f"k = {k} is (near) a discrete Dirichlet eigenvalue on the {grid.n}x{grid.n} "
                f"grid (pivot ratio {self.min_pivot_ratio:.2e}); perturb k slightly"
            )
        self._owner = threading.get_ident()
        self._lu = lu
        self._local = threading.local()
        self._counter = itertools.count()
        self._count_lock = threading.Lock()
        self._solves = 0

    @property
    def solve_count(self) -> int:
        return self._solves

    def _factor(self):
        if threading.get_ident() == self._owner:
            return self._lu
        lu = getattr(self._local, "lu", None)
        if lu is None:
            lu = spla.splu(self.matrix)
            self._local.lu = lu
        return lu

    def solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``A x = rhs`` for one column or a block of columns."""
        ncols = 1 if rhs.ndim == 1 else rhs.shape[1]
        with self._count_lock:
            self._solves += ncols
        return self._factor().solve(np.ascontiguousarray(rhs, dtype=complex))

    def apply(self, u: ScalarField2D) -> np.ndarray:
        """Discrete ``(Delta_h + k^2) u`` at interior nodes, shape (n-2, n-2)."""
        v = u.values
        h2 = self.grid.h ** 2
        lap = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4 * v[1:-1, 1:-1]) / h2
        return lap + self.k**2 * v[1:-1, 1:-1]

    def boundary_rhs(self, g: np.ndarray) -> np.ndarray:
        """Move Dirichlet values of a full ``(n, n)`` array to the interior RHS."""
        h2 = self.grid.h ** 2
        out = np.zeros((self.n_int, self.n_int), dtype=complex)
        out[0, :] -= g[0, 1:-1] / h2
        out[-1, :] -= g[-1, 1:-1] / h2
        out[:, 0] -= g[1:-1, 0] / h2
        out[:, -1] -= g[1:-1, -1] / h2
        return out


def assemble_operator(grid: Grid2D, k: float) -> HelmholtzOperator:
    return HelmholtzOperator(grid, k)


def plane_wave_field(grid: Grid2D, zeta) -> ScalarField2D:
    """``exp(i x . zeta)`` with the bilinear dot product."""
    zeta = np.asarray(zeta, dtype=complex)
    x = grid.coords
    ex = np.exp(1j * x * zeta[0])
    ey = np.exp(1j * x * zeta[1])
    return ScalarField2D(grid, np.outer(ex, ey))


def _boundary_array(grid: Grid2D, g: BoundaryTrace) -> np.ndarray:
    if g.geometry.grid != grid:
        raise GridError("boundary trace belongs to a different grid")
    full = np.zeros((grid.n, grid.n), dtype=complex)
    full[g.geometry.index[:, 0], g.geometry.index[:, 1]] = g.values
    return full


def _solve_block(op: HelmholtzOperator, src: np.ndarray, bnd: np.ndarray) -> np.ndarray:
    """Solve for a stack of interior sources ``(b, n-2, n-2)`` and boundary arrays ``(b, n, n)``."""
    b = src.shape[0]
    n_int = op.n_int
    rhs = np.empty((n_int * n_int, b), dtype=complex)
    for c in range(b):
        rhs[:, c] = (src[c] + op.boundary_rhs(bnd[c])).ravel()
    sol = op.solve_interior(rhs if b > 1 else rhs[:, 0])
    sol = sol.reshape(n_int * n_int, b)
    out = bnd.copy()
    for c in range(b):
        out[c, 1:-1, 1:-1] = sol[:, c].reshape(n_int, n_int)
    return out


def solve_linear(op: HelmholtzOperator, rhs: ScalarField2D | None, g: BoundaryTrace | None) -> ScalarField2D:
    """Solve ``(Delta_h + k^2) u = rhs`` inside with ``u = g`` on the boundary.

    ``None`` stands for a zero source or zero boundary data.  Boundary values of
    ``rhs`` are ignored.
    """
    grid = op.grid
    src = np.zeros((grid.n - 2, grid.n - 2), dtype=complex)
    if rhs is not None:
        if rhs.grid != grid:
            raise GridError(f"source grid {rhs.grid.n} does not match operator grid {grid.n}")
        src = rhs.values[1:-1, 1:-1]
    bnd = np.zeros((grid.n, grid.n), dtype=complex) if g is None else _boundary_array(grid, g)
    return ScalarField2D(grid, _solve_block(op, src[None], bnd[None])[0])


def evaluate_polynomial(c: Sequence[ScalarField2D], u: ScalarField2D) -> ScalarField2D:
    """Pointwise ``sum_l c_l(x) u(x)^l`` by Horner's rule."""
    check_same_grid(u, *c)
    return ScalarField2D(u.grid, _poly(np.stack([f.values for f in c]) if c else None, u.values))


def _poly(coeffs: np.ndarray | None, u: np.ndarray) -> np.ndarray:
    if coeffs is None or len(coeffs) == 0:
        return np.zeros_like(u, dtype=complex)
    acc = np.broadcast_to(coeffs[-1], u.shape).astype(complex)
    for cl in coeffs[-2::-1]:
        acc = cl + u * acc
    return u * acc


@dataclass
class PicardOptions:
    rel_tol: float = 1e-10
    max_iters: int = 50

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class PicardResult:
    fields: list[ScalarField2D]
    iterations: list[int]
    updates: list[float]
    update_history: list[list[float]] = field(repr=False)
    background: list[ScalarField2D] = field(repr=False)


def picard_solve(
    op: HelmholtzOperator,
    c: Sequence[ScalarField2D],
    traces: Sequence[BoundaryTrace],
    opts: PicardOptions | None = None,
) -> PicardResult:
    """Picard iteration for a batch of boundary data sharing one operator.

    Every column is seeded with the linear solution ``u0`` and iterates
    ``u <- solve(P(c, u), f)`` until its relative L2 update drops below
    ``rel_tol``.  Converged columns are frozen so a batch gives exactly the
    same fields as solving each trace alone.
    """
    opts = opts or PicardOptions()
    grid = op.grid
    if c:
        check_same_grid(*c)
        if c[0].grid != grid:
            raise GridError("coefficients and operator use different grids")
    coeffs = np.stack([f.values[1:-1, 1:-1] for f in c]) if c else None
    nb = len(traces)
    bnd = np.stack([_boundary_array(grid, g) for g in traces])
    zero_src = np.zeros((nb, grid.n - 2, grid.n - 2), dtype=complex)
    u = _solve_block(op, zero_src, bnd)
    background = [ScalarField2D(grid, u[b]) for b in range(nb)]
    active = list(range(nb))
    iters = [0] * nb
    last = [np.inf] * nb
    history: list[list[float]] = [[] for _ in range(nb)]
    for it in range(1, opts.max_iters + 1):
        if not active:
            break
        src = np.stack([_poly(coeffs, u[b, 1:-1, 1:-1]) for b in active])
        new = _solve_block(op, src, bnd[active])
        still = []
        for pos, b in enumerate(active):
            diff = np.linalg.norm(new[pos] - u[b])
            size = np.linalg.norm(new[pos])
            upd = float(diff / size) if size > 0 else float(diff)
            if not np.isfinite(upd):
                raise ConvergenceError(f"Picard iteration blew up at step {it}", upd, it)
            u[b] = new[pos]
            iters[b] = it
            last[b] = upd
            history[b].append(upd)
            if upd >= opts.rel_tol:
                still.append(b)
        active = still
    if active:
        worst = max(last[b] for b in active)
        raise ConvergenceError(
            f"Picard iteration did not converge in {opts.max_iters} steps "
            f"(last relative update {worst:.3e}); coefficients or boundary data "
            "are too large for the fixed-point regime",
            worst,
            opts.max_iters,
        )
    return PicardResult([ScalarField2D(grid, u[b]) for b in range(nb)], iters, last, history, background)


def solve_nonlinear(
    op: HelmholtzOperator,
    c: Sequence[ScalarField2D],
    f: BoundaryTrace,
    opts: PicardOptions | None = None,
) -> ScalarField2D:
    return picard_solve(op, c, [f], opts).fields[0]


def nonlinear_residual(op: HelmholtzOperator, c: Sequence[ScalarField2D], u: ScalarField2D) -> np.ndarray:
    """Interior residual ``Delta_h u + k^2 u - P(x, u)``."""
    return op.apply(u) - evaluate_polynomial(c, u).values[1:-1, 1:-1]


def neumann_trace(u: ScalarField2D, geometry: BoundaryGeometry | None = None) -> BoundaryTrace:
    """Outward normal derivative by ``(3u_b - 4u_{b-1} + u_{b-2}) / 2h``.

    At a corner the value is the mean of the two edge derivatives, so that
    with the corner weight ``h`` the boundary sum matches the per-edge
    trapezoid rule.
    """
    geometry = geometry or boundary_geometry(u.grid)
    if geometry.grid != u.grid:
        raise GridError("field and boundary geometry use different grids")
    if u.grid.n < 4:
        raise GridError("one-sided normal derivative needs n >= 4")
    v = u.values
    h = u.grid.h
    last = u.grid.n - 1
    # outward derivatives on each side, evaluated at every node of that side
    d_left = (3 * v[0, :] - 4 * v[1, :] + v[2, :]) / (2 * h)
    d_right = (3 * v[last, :] - 4 * v[last - 1, :] + v[last - 2, :]) / (2 * h)
    d_bottom = (3 * v[:, 0] - 4 * v[:, 1] + v[:, 2]) / (2 * h)
    d_top = (3 * v[:, last] - 4 * v[:, last - 1] + v[:, last - 2]) / (2 * h)
    i, j = geometry.index[:, 0], geometry.index[:, 1]
    total = np.zeros(len(geometry), dtype=complex)
    count = np.zeros(len(geometry))
    for mask, side, along in (
        (i == 0, d_left, j),
        (i == last, d_right, j),
        (j == 0, d_bottom, i),
        (j == last, d_top, i),
    ):
        total[mask] += side[along[mask]]
        count[mask] += 1
    out = total / count
    return BoundaryTrace(geometry, out)

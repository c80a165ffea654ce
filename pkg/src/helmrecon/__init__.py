"""Multi-coefficient reconstruction for polynomial-nonlinear Helmholtz equations.

The pipeline: plane-wave boundary data -> nonlinear forward solves ->
inclusion-exclusion data ``d_ell(xi)`` -> triangular back-substitution for
the Fourier modes ``F[c_ell]`` -> truncated inverse transform.
"""

from .grid import Bump, Grid2D, ScalarField2D, SupportSpec, build_grid, synth_coefficient, volume_quadrature
from .combinatorics import enumerate_multi_indices, multinomial_weight, pie_evaluate, q_polynomial, signed_subsets
from .wavevectors import WaveVectorSet, build_wavevector_set, build_zeta_pm
from .boundary import BoundaryGeometry, BoundaryTrace, boundary_geometry, boundary_integral
from .solver import HelmholtzOperator, PicardOptions, assemble_operator, neumann_trace, solve_linear, solve_nonlinear
from .measurement import measure_d, oracle_d
from .spectral import (
    FrequencyGrid,
    SpectrumTable,
    band_limit,
    direct_fourier,
    interpolate_spectrum,
    inverse_fourier_truncated,
)
from .inversion import ReconstructionPlan, ReconstructionResult, back_substitute, reconstruct, relative_l2_error

__version__ = "0.1.0"

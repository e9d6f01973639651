"""Linear fractional differential systems with variable coefficients.

Solves ``D^alpha x = A(t) x + u(t)`` with the Riemann-Liouville derivative of
order ``0 < alpha < 1`` and weighted initial value ``J^(1-alpha) x(t0) = x0``,
by building the state-transition matrix as a generalized Peano-Baker series.
Polynomial ``A`` is handled exactly over a fractional power series algebra;
sampled ``A`` on a uniform grid with product integration.
"""

from .errors import (
    DimensionError,
    DomainError,
    FracError,
    NonConvergenceError,
    PoleError,
    ProblemFileError,
)
from .frac_core import (
    FracPowerSeries,
    MatrixPolynomial,
    base_term,
    mul_poly,
    power_convolve,
    rl_derivative,
    rl_integral,
)
from .numeric_frac import (
    Grid,
    SampledKernel,
    SampledMatrixFunction,
    check_diff_under_integral,
    grid_rl_derivative,
    grid_rl_integral,
)
from .solver import (
    IvpProblem,
    Solution,
    residual_check,
    solve,
    solve_homogeneous,
    solve_inhomogeneous,
)
from .specfun import MlParams, alpha_exp, gamma, matrix_ml, mittag_leffler
from .transition import (
    ConvergenceReport,
    TransitionMatrix,
    peano_baker_exact,
    peano_baker_grid,
    two_point_kernel,
    two_point_phi,
    verify_lemma4,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport",
    "DimensionError",
    "DomainError",
    "FracError",
    "FracPowerSeries",
    "Grid",
    "IvpProblem",
    "MatrixPolynomial",
    "MlParams",
    "NonConvergenceError",
    "PoleError",
    "ProblemFileError",
    "SampledKernel",
    "SampledMatrixFunction",
    "Solution",
    "TransitionMatrix",
    "alpha_exp",
    "base_term",
    "check_diff_under_integral",
    "gamma",
    "grid_rl_derivative",
    "grid_rl_integral",
    "matrix_ml",
    "mittag_leffler",
    "mul_poly",
    "peano_baker_exact",
    "peano_baker_grid",
    "power_convolve",
    "residual_check",
    "rl_derivative",
    "rl_integral",
    "solve",
    "solve_homogeneous",
    "solve_inhomogeneous",
    "two_point_kernel",
    "two_point_phi",
    "verify_lemma4",
]

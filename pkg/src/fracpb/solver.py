"""Initial value problems ``D^alpha x = A(t) x + u(t)``, ``J^(1-alpha) x(t0) = x0``.

The homogeneous solution is ``Phi(t, t0) x0``; the forced response is
``int_{t0}^t Phi(t, tau) u(tau) dtau``.  Note that ``x0`` is the weighted
initial value of the Riemann-Liouville problem, not ``x(t0)``: for
``x0 != 0`` the solution behaves like ``(t - t0)^(alpha - 1)`` near ``t0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError
from .frac_core import (
    FracPowerSeries,
    MatrixPolynomial,
    mul_poly,
    power_convolve,
    rl_derivative,
    rl_integral,
)
from .numeric_frac import (
    Grid,
    SampledMatrixFunction,
    grid_rl_derivative,
    grid_rl_integral,
    pointwise_product,
)
from .transition import (
    DEFAULT_MAX_TERMS,
    DEFAULT_TOL,
    ConvergenceReport,
    TransitionMatrix,
    TwoPointKernel,
    _iterate,
    peano_baker_exact,
    peano_baker_grid,
    two_point_kernel,
)

EXACT = "exact"
GRID = "grid"


@dataclass(frozen=True, eq=False)
class IvpProblem:
    """One initial value problem.

    ``A`` is a :class:`MatrixPolynomial` or a regular
    :class:`SampledMatrixFunction`; ``u`` is an ``n x 1`` series or sampled
    function, or ``None``.  ``u`` must be continuous on ``[t0, T]``; a
    sampled ``u`` is treated as piecewise linear between nodes.  ``tol`` and ``grid`` are optional solver settings
    carried along so that problem files round-trip.
    """

    alpha: float
    t0: float
    T: float
    A: MatrixPolynomial | SampledMatrixFunction
    x0: np.ndarray
    u: FracPowerSeries | SampledMatrixFunction | None = None
    tol: float | None = None
    grid: int | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.T > self.t0:
            raise DomainError(f"horizon T={self.T} must exceed t0={self.t0}")
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        n = self.A.dim
        if x0.shape != (n,):
            raise DimensionError(f"x0 has {x0.size} entries but A is {n}x{n}")
        if isinstance(self.A, SampledMatrixFunction):
            self._check_grid(self.A, "A")
            if self.A.left_exponent is not None:
                raise DomainError("A must be regular (no singular factor at t0)")
        if isinstance(self.u, FracPowerSeries):
            if self.u.shape != (n, 1):
                raise DimensionError(f"u must be an {n}x1 series, got {self.u.shape}")
            if abs(self.u.origin - self.t0) > 1e-12:
                raise DimensionError("u must be anchored at t0")
            if self.u.terms and self.u.terms[0][0] < 1:
                raise DomainError("u must be continuous on [t0, T]; exponents below 1 are singular")
        elif isinstance(self.u, SampledMatrixFunction):
            self._check_grid(self.u, "u")
            if self.u.shape != (n, 1):
                raise DimensionError(f"u must be sampled as {n}x1, got {self.u.shape}")
            if self.u.sigma < 1:
                raise DomainError("u must be continuous on [t0, T]")
        elif self.u is not None:
            raise TypeError(f"unsupported input type {type(self.u).__name__}")
        if self.tol is not None and not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.grid is not None and (int(self.grid) != self.grid or self.grid < 4):
            raise DomainError("grid must be an integer of at least 4")

    def _check_grid(self, f: SampledMatrixFunction, name: str):
        g = f.grid
        if abs(g.t0 - self.t0) > 1e-12 or abs(g.T - self.T) > 1e-12:
            raise DimensionError(f"{name} is sampled on [{g.t0}, {g.T}], not [{self.t0}, {self.T}]")

    @property
    def dim(self) -> int:
        return self.A.dim


@dataclass(frozen=True, eq=False)
class Solution:
    """Solution ``x(t)`` as an ``n x 1`` series (exact path) or samples (grid path)."""

    representation: FracPowerSeries | SampledMatrixFunction
    transition: TransitionMatrix | ConvergenceReport
    path: str
    kernel: TwoPointKernel | ConvergenceReport | None = None
    forced_tail: FracPowerSeries | None = field(default=None, repr=False)

    def __call__(self, t) -> np.ndarray:
        """Values at ``t``; grid solutions interpolate the regular factor."""
        if self.path == EXACT:
            return self.representation.eval(t)[..., 0]
        out = self.representation.interpolate(t)[..., 0]
        return out if np.ndim(t) else out[0]

    @property
    def tail_estimate(self) -> float:
        return self.transition.tail_estimate


def _settings(p: IvpProblem, tol: float | None):
    return tol if tol is not None else (p.tol if p.tol is not None else DEFAULT_TOL)


def _grid_for(p: IvpProblem, grid: int | None) -> Grid | None:
    grids = {f.grid for f in (p.A, p.u) if isinstance(f, SampledMatrixFunction)}
    if len(grids) > 1:
        raise DimensionError("A and u are sampled on different grids")
    N = grid if grid is not None else p.grid
    if grids:
        g = grids.pop()
        if N is not None and N != g.N:
            raise DimensionError(f"requested {N} intervals but the data is sampled with {g.N}")
        return g
    return None if N is None else Grid(p.t0, p.T, int(N))


def _sampled(f, grid: Grid) -> SampledMatrixFunction:
    if isinstance(f, SampledMatrixFunction):
        return f
    return SampledMatrixFunction.from_callable(grid, f.eval)


def _exact_phi(p: IvpProblem, tol: float, max_terms: int) -> tuple[MatrixPolynomial, TransitionMatrix]:
    A = p.A.reanchor(p.t0)
    return A, peano_baker_exact(A, p.alpha, p.T, tol, max_terms)


def solve_homogeneous(
    p: IvpProblem,
    *,
    tol: float | None = None,
    max_terms: int = DEFAULT_MAX_TERMS,
    grid: int | None = None,
) -> Solution:
    """``x(t) = Phi(t, t0) x0``, ignoring ``p.u``.

    The exact path is used for polynomial ``A`` unless a grid is requested
    (``grid`` argument or ``p.grid``) or ``A`` is sampled.
    """
    tol = _settings(p, tol)
    g = _grid_for(p, grid)
    if g is None:
        _, phi = _exact_phi(p, tol, max_terms)
        return Solution(phi.series @ p.x0, phi, EXACT)
    phi_grid, report = peano_baker_grid(_sampled(p.A, g), p.alpha, tol, max_terms)
    return Solution(phi_grid @ p.x0, report, GRID)


def _shift(u: FracPowerSeries, p: int) -> FracPowerSeries:
    """``(t - t0)^p u(t)``."""
    if p == 0:
        return u
    return FracPowerSeries([(g + p, c) for g, c in u.terms], u.origin, u.shape)


def _convolve_kernel(parts: dict[int, FracPowerSeries], u: FracPowerSeries) -> FracPowerSeries:
    terms = [term for p, K in parts.items() for term in power_convolve(K, _shift(u, p)).terms]
    return FracPowerSeries(terms, u.origin, u.shape)


def solve_inhomogeneous(
    p: IvpProblem,
    *,
    tol: float | None = None,
    max_terms: int = DEFAULT_MAX_TERMS,
    grid: int | None = None,
) -> Solution:
    """``x(t) = Phi(t, t0) x0 + int_{t0}^t Phi(t, tau) u(tau) dtau``.

    Exact path: ``Phi(t, tau)`` is expanded as ``sum_p (tau - t0)^p K_p(t - tau)``
    and each kernel term is convolved with each input term through the Beta
    integral.  Grid path: the forced response is accumulated as
    ``sum_k (J^alpha A)^k J^alpha u``, which is the same Peano-Baker series
    integrated against ``u`` and costs ``O(N^2)`` per term.
    """
    if p.u is None:
        return solve_homogeneous(p, tol=tol, max_terms=max_terms, grid=grid)
    tol = _settings(p, tol)
    g = _grid_for(p, grid)
    if g is None:
        A, phi = _exact_phi(p, tol, max_terms)
        kernel = two_point_kernel(A, p.alpha, p.T, tol, max_terms)
        forced = _convolve_kernel(kernel.parts, p.u)
        tail = None if kernel.omitted is None else _convolve_kernel(kernel.omitted, p.u)
        return Solution(phi.series @ p.x0 + forced, phi, EXACT, kernel, tail)

    A_s = _sampled(p.A, g)
    u_s = _sampled(p.u, g)
    phi_grid, report = peano_baker_grid(A_s, p.alpha, tol, max_terms)
    terms, _, forced_report = _iterate(
        grid_rl_integral(u_s, p.alpha),
        lambda y: grid_rl_integral(pointwise_product(A_s, y), p.alpha),
        SampledMatrixFunction.sup_norm,
        lambda y: not np.any(y.values),
        tol,
        max_terms,
        "forced response series (grid)",
    )
    x = phi_grid @ p.x0
    for y in terms:
        x = x + y
    return Solution(x.with_exponent(p.alpha), report, GRID, forced_report)


def solve(p: IvpProblem, **kwargs) -> Solution:
    """Dispatch to :func:`solve_inhomogeneous` or :func:`solve_homogeneous`."""
    return solve_inhomogeneous(p, **kwargs)


@dataclass(frozen=True)
class ResidualReport:
    """How well a solution satisfies the equation and the initial condition.

    Exact path: ``residual`` is the series ``D^alpha x - A x - u``;
    ``integrated_residual`` is the sup-norm bound of ``J^alpha`` of it,
    which truncation theory bounds by ``tail_bound``;
    ``unexplained_residual`` is the part not accounted for by the omitted
    Peano-Baker terms, relative to the size of ``A x``.

    Grid path: ``residual`` holds node samples and ``max_residual`` is taken
    over interior nodes from ``t0 + margin`` on; the integrated and
    unexplained entries are ``None``.
    """

    path: str
    residual: FracPowerSeries | SampledMatrixFunction
    max_residual: float
    initial_condition_error: float
    tail_bound: float
    integrated_residual: float | None = None
    unexplained_residual: float | None = None


def residual_check(p: IvpProblem, sol: Solution, *, margin: float = 0.05) -> ResidualReport:
    """Substitute ``sol`` back into the problem ``p``."""
    alpha = p.alpha
    if sol.path == EXACT:
        x = sol.representation
        A = p.A.reanchor(p.t0)
        u = p.u if p.u is not None else FracPowerSeries.zero((p.dim, 1), p.t0)
        residual = rl_derivative(x, alpha) - mul_poly(A, x) - u
        ic = rl_integral(x, 1 - alpha).limit_at_origin()[:, 0] - p.x0
        phi: TransitionMatrix = sol.transition
        length = p.T - p.t0
        omitted = FracPowerSeries.zero((p.dim, 1), p.t0)
        tail_bound = phi.tail_estimate * float(np.sum(np.abs(p.x0)))
        if phi.omitted is not None:
            omitted = omitted + phi.omitted @ p.x0
        if sol.forced_tail is not None:
            omitted = omitted + sol.forced_tail
            tail_bound += sol.forced_tail.sup_bound(length)
        predicted = -rl_derivative(omitted, alpha)
        scale = max(mul_poly(A, x).max_coefficient(), u.max_coefficient(), 1e-300)
        return ResidualReport(
            path=EXACT,
            residual=residual,
            max_residual=residual.max_coefficient(),
            initial_condition_error=float(np.max(np.abs(ic), initial=0.0)),
            tail_bound=tail_bound,
            integrated_residual=rl_integral(residual, alpha).sup_bound(length),
            unexplained_residual=(residual - predicted).max_coefficient() / scale,
        )

    x: SampledMatrixFunction = sol.representation
    g = x.grid
    lhs = grid_rl_derivative(x, alpha).node_values()
    A_s = _sampled(p.A, g)
    rhs = pointwise_product(A_s, x).node_values()
    if p.u is not None:
        rhs = rhs + _sampled(p.u, g).node_values()
    res = lhs - rhs
    start = max(1, int(np.ceil(margin * g.N)))
    ic = grid_rl_integral(x, 1 - alpha).regular_factor(1.0)[0, :, 0] - p.x0
    tail = sol.transition.tail_estimate * float(np.sum(np.abs(p.x0)))
    if isinstance(sol.kernel, ConvergenceReport):
        tail += sol.kernel.tail_estimate
    return ResidualReport(
        path=GRID,
        residual=SampledMatrixFunction(g, res),
        max_residual=float(np.max(np.abs(res[start : g.N]), initial=0.0)),
        initial_condition_error=float(np.max(np.abs(ic), initial=0.0)),
        tail_bound=tail,
    )

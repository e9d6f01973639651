"""Identity suites behind ``fracpb validate``.

Every check compares a library result with an independent reference
(``math.gamma``, adaptive quadrature, a closed form, or the other solution
path) and reports the residual next to a frozen tolerance.  The grid
tolerances were measured once and pinned with headroom; see the constants
below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.integrate import quad

from . import specfun
from .frac_core import (
    FracPowerSeries,
    MatrixPolynomial,
    base_term,
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
from .solver import IvpProblem, residual_check, solve_inhomogeneous
from .transition import peano_baker_exact, peano_baker_grid, verify_lemma4

EXACT_RTOL = 1e-12
GRID_N = 1024
GRID_SMOOTH_TOL = 1e-3  # integrals and derivatives of smooth functions
GRID_SINGULAR_TOL = 1e-6  # annihilation and unit normalization of the base term
GRID_INVERSION_TOL = 1e-4
GRID_SEMIGROUP_TOL = 5e-4
CONSTANT_A_TOL = 1e-9
PATH_AGREEMENT_TOL = 1e-3  # exact versus grid at N=512, t >= t0 + 0.05
RANDOM_A_MAX_TERMS = 256  # slow decay for small alpha and |A| near 3
DIFF_UNDER_INTEGRAL_TOL = 1e-3

ALPHAS = (0.3, 0.5, 0.7)


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        out = f"{status}  {self.name:<44} residual={self.residual:.3e}  tol={self.tolerance:.1e}"
        return f"{out}  ({self.note})" if self.note else out


# reference problems


def worked_example_A(origin: float = 0.0) -> MatrixPolynomial:
    """``A(t) = [[0, t - origin], [0, 0]]``."""
    return MatrixPolynomial({1: [[0.0, 1.0], [0.0, 0.0]]}, origin)


def worked_example_problem(alpha: float = 0.5, horizon: float = 1.0) -> IvpProblem:
    u = FracPowerSeries.column([(1.0, [1.0, 0.0])])
    return IvpProblem(alpha, 0.0, horizon, worked_example_A(), [0.0, 1.0], u)


def worked_example_solution(alpha: float) -> FracPowerSeries:
    """Closed form, coefficients from ``math.gamma``."""
    g = math.gamma
    return FracPowerSeries.column(
        [
            (alpha, [0.0, 1 / g(alpha)]),
            (alpha + 1, [1 / g(alpha + 1), 0.0]),
            (2 * alpha + 1, [alpha / g(2 * alpha + 1), 0.0]),
        ]
    )


def random_polynomial(rng: np.random.Generator, max_dim: int = 3, max_degree: int = 2) -> MatrixPolynomial:
    """Entries uniform in [-1, 1]; dimension and degree drawn uniformly."""
    n = int(rng.integers(1, max_dim + 1))
    deg = int(rng.integers(0, max_degree + 1))
    return MatrixPolynomial({m: rng.uniform(-1, 1, (n, n)) for m in range(deg + 1)}, 0.0, n)


def random_series(rng: np.random.Generator, n: int = 2, max_terms: int = 6) -> FracPowerSeries:
    k = int(rng.integers(1, max_terms + 1))
    gammas = rng.uniform(0.05, 4.0, k)
    return FracPowerSeries([(g, rng.uniform(-1, 1, (n, n))) for g in gammas], 0.0, (n, n))


def _rel_gap(x: FracPowerSeries, y: FracPowerSeries) -> float:
    if [round(g, 9) for g in x.exponents] != [round(g, 9) for g in y.exponents]:
        return math.inf
    scale = max(x.max_coefficient(), y.max_coefficient(), 1e-300)
    return (x - y).max_coefficient() / scale


def _max_rel(pairs) -> float:
    return max(abs(a / b - 1) for a, b in pairs)


# series algebra


def _series_identities(rng: np.random.Generator, samples: int) -> Iterator[CheckResult]:
    fs = [random_series(rng) for _ in range(samples)]
    orders = rng.uniform(0.1, 1.0, (samples, 2))

    yield CheckResult(
        "inversion D^a J^a f = f (series)",
        max(_rel_gap(rl_derivative(rl_integral(f, a), a), f) for f, (a, _) in zip(fs, orders)),
        EXACT_RTOL,
    )
    yield CheckResult(
        "semigroup J^b J^a = J^(a+b) (series)",
        max(
            _rel_gap(rl_integral(rl_integral(f, a), b), rl_integral(f, a + b))
            for f, (a, b) in zip(fs, orders)
        ),
        EXACT_RTOL,
    )

    cases = [(a, b) for a in ALPHAS for b in (0.5, 1.0, 1.5, 2.0 + a)]
    pairs = []
    for a, b in cases:
        coeff = rl_integral(FracPowerSeries([(b, [[1.0]])]), a).terms[0][1][0, 0]
        moment, _ = quad(lambda _: 1.0, 0.0, 1.0, weight="alg", wvar=(b - 1, a - 1), epsabs=0, epsrel=1e-13)
        pairs.append((coeff, moment / math.gamma(a)))
    yield CheckResult("power rule for J^a (series vs quadrature)", _max_rel(pairs), EXACT_RTOL)

    pairs = []
    for a, b in cases:
        if b - a <= 0:
            continue
        coeff = rl_derivative(FracPowerSeries([(b, [[1.0]])]), a).terms[0][1][0, 0]
        pairs.append((coeff, math.gamma(b) / math.gamma(b - a)))
    yield CheckResult("power rule for D^a (series)", _max_rel(pairs), EXACT_RTOL)

    yield CheckResult(
        "D^a annihilates the base term (series)",
        max(rl_derivative(base_term(a, 2), a).max_coefficient() for a in ALPHAS),
        EXACT_RTOL,
    )
    yield CheckResult(
        "J^(1-a) base term = 1 (series)",
        max(_rel_gap(rl_integral(base_term(a, 2), 1 - a), FracPowerSeries.constant(np.eye(2))) for a in ALPHAS),
        EXACT_RTOL,
    )


# grid operators


def _grid_identities(N: int) -> Iterator[CheckResult]:
    grid = Grid(0.0, 1.0, N)
    x = grid.nodes
    inner = slice(1, N)
    smooth = SampledMatrixFunction.from_callable(grid, lambda t: np.exp(-t) * np.cos(2 * t) + t**2)

    errs = []
    for a in ALPHAS:
        back = grid_rl_derivative(grid_rl_integral(smooth, a), a)
        errs.append(np.max(np.abs(back.node_values()[inner] - smooth.values[inner])))
    yield CheckResult(f"inversion D^a J^a f = f (grid N={N})", max(errs), GRID_INVERSION_TOL)

    errs = []
    for a, b in [(0.3, 0.5), (0.5, 0.5), (0.7, 0.4)]:
        twice = grid_rl_integral(grid_rl_integral(smooth, a), b).node_values()
        once = grid_rl_integral(smooth, a + b).node_values()
        errs.append(np.max(np.abs(twice - once)))
    yield CheckResult(f"semigroup J^b J^a = J^(a+b) (grid N={N})", max(errs), GRID_SEMIGROUP_TOL)

    one = SampledMatrixFunction.from_callable(grid, lambda t: np.ones_like(t))
    ramp = SampledMatrixFunction.from_callable(grid, lambda t: t)
    errs = []
    for a in ALPHAS:
        errs.append(np.max(np.abs(grid_rl_integral(one, a).node_values()[:, 0, 0] - x**a / math.gamma(1 + a))))
        errs.append(np.max(np.abs(grid_rl_integral(ramp, a).node_values()[:, 0, 0] - x ** (1 + a) / math.gamma(2 + a))))
    yield CheckResult(f"power rule for J^a (grid N={N})", max(errs), GRID_SMOOTH_TOL)

    errs = []
    for a in ALPHAS:
        d = grid_rl_derivative(one, a).node_values()[1:, 0, 0]
        exact = x[1:] ** -a / math.gamma(1 - a)
        errs.append(np.max(np.abs(d / exact - 1)))
    yield CheckResult(f"power rule for D^a (grid N={N}, relative)", max(errs), GRID_SMOOTH_TOL)

    errs5, errs6 = [], []
    for a in ALPHAS:
        base = SampledMatrixFunction(grid, np.full((N + 1, 1, 1), 1 / math.gamma(a)), a)
        errs5.append(np.max(np.abs(grid_rl_derivative(base, a).node_values()[inner])))
        errs6.append(np.max(np.abs(grid_rl_integral(base, 1 - a).node_values()[1:] - 1)))
    yield CheckResult(f"D^a annihilates the base term (grid N={N})", max(errs5), GRID_SINGULAR_TOL)
    yield CheckResult(f"J^(1-a) base term = 1 (grid N={N})", max(errs6), GRID_SINGULAR_TOL)


# transition matrix and solutions


def _transition_checks(rng: np.random.Generator, samples: int) -> Iterator[CheckResult]:
    worst = 0.0
    for a in ALPHAS:
        rep = verify_lemma4(peano_baker_exact(worked_example_A(), a, 1.0), worked_example_A())
        worst = max(worst, rep.max_residual, rep.initial_condition_error)
    yield CheckResult("transition worked example D^a Phi = A Phi, J^(1-a) Phi -> I", worst, EXACT_RTOL)

    tele, unexplained, excess, ic = 0.0, 0.0, 0.0, 0.0
    for _ in range(samples):
        A = random_polynomial(rng)
        a = float(rng.uniform(0.3, 0.9))
        phi = peano_baker_exact(A, a, 1.0, max_terms=RANDOM_A_MAX_TERMS)
        rep = verify_lemma4(phi, A)
        tele = max(tele, max(rep.telescoping_errors, default=0.0))
        unexplained = max(unexplained, rep.unexplained_residual)
        scale = max(phi.series.max_coefficient(), 1.0)
        excess = max(excess, (rep.integrated_residual - rep.tail_estimate) / scale)
        ic = max(ic, rep.initial_condition_error)
    yield CheckResult(f"transition telescoping, {samples} random A", tele, EXACT_RTOL)
    yield CheckResult(f"transition residual only from omitted term, {samples} random A", unexplained, EXACT_RTOL)
    yield CheckResult(f"transition residual within tail estimate, {samples} random A", max(excess, 0.0), EXACT_RTOL)
    yield CheckResult(f"transition initial condition, {samples} random A", ic, EXACT_RTOL)

    worst = 0.0
    for _ in range(samples):
        M = rng.uniform(-1, 1, (2, 2))
        M *= rng.uniform(0.1, 1.5) / np.linalg.norm(M, 2)
        for a in (0.4, 0.8):
            phi = peano_baker_exact(MatrixPolynomial.constant(M), a, 1.0)
            for t in (0.25, 0.5, 1.0):
                worst = max(worst, np.max(np.abs(phi.eval(t) - specfun.alpha_exp(a, M, t))))
    yield CheckResult(f"constant A matches alpha-exponential, {samples} draws", worst, CONSTANT_A_TOL)

    grid = Grid(0.0, 1.0, 512)
    exact = peano_baker_exact(worked_example_A(), 0.5, 1.0)
    approx, _ = peano_baker_grid(SampledMatrixFunction.from_callable(grid, worked_example_A().eval), 0.5)
    keep = grid.nodes >= 0.05
    err = np.max(np.abs(approx.node_values()[keep] - exact.eval(grid.nodes[keep])))
    yield CheckResult("exact vs grid Phi, worked example (N=512)", err, PATH_AGREEMENT_TOL)


def _solution_checks() -> Iterator[CheckResult]:
    worst, resid = 0.0, 0.0
    for a in ALPHAS:
        p = worked_example_problem(a)
        sol = solve_inhomogeneous(p)
        worst = max(worst, _rel_gap(sol.representation, worked_example_solution(a)))
        rep = residual_check(p, sol)
        resid = max(resid, rep.max_residual, rep.initial_condition_error)
    yield CheckResult("worked example closed-form solution", worst, EXACT_RTOL)
    yield CheckResult("worked example equation residual", resid, EXACT_RTOL)


# full-level extras


def _diff_under_integral_checks() -> Iterator[CheckResult]:
    a = 0.5
    kernels = {
        "phi = 1": (lambda T, S: np.ones_like(T), 1.0),
        "phi = (t-s)^(a-1)/Gamma(a)": (lambda T, S: np.full_like(T, 1 / math.gamma(a)), a),
        "phi = cos(t)(1+s)(t-s)^(a-1)": (lambda T, S: np.cos(T) * (1 + S), a),
    }
    for label, (fn, rho) in kernels.items():
        for N in (512, 1024):
            rep = check_diff_under_integral(SampledKernel.from_callable(Grid(0.0, 1.0, N), fn, rho), a)
            yield CheckResult(f"derivative under integral, {label} (N={N})", rep.residual, DIFF_UNDER_INTEGRAL_TOL)


def _path_agreement_checks(rng: np.random.Generator) -> Iterator[CheckResult]:
    s, N = 0.3, 512
    grid = Grid(s, 1.0, N)
    A_s = worked_example_A().reanchor(s)
    exact = peano_baker_exact(A_s, 0.5, 1.0)
    approx, _ = peano_baker_grid(SampledMatrixFunction.from_callable(grid, A_s.eval), 0.5)
    keep = grid.nodes >= s + 0.05
    err = np.max(np.abs(approx.node_values()[keep] - exact.eval(grid.nodes[keep])))
    yield CheckResult("two-point Phi(t, 0.3) exact vs grid (N=512)", err, PATH_AGREEMENT_TOL)

    A = MatrixPolynomial({m: rng.uniform(-1, 1, (2, 2)) for m in range(3)})
    u = FracPowerSeries.column([(1.0, [1.0, 0.5]), (2.5, [0.2, -1.0])])
    p = IvpProblem(0.6, 0.0, 1.0, A, [1.0, -1.0], u)
    exact_sol = solve_inhomogeneous(p)
    grid_sol = solve_inhomogeneous(p, grid=N)
    nodes = grid_sol.representation.grid.nodes
    keep = nodes >= 0.05
    err = np.max(np.abs(grid_sol.representation.node_values()[keep, :, 0] - exact_sol(nodes[keep])))
    yield CheckResult("inhomogeneous exact vs grid, random A (N=512)", err, PATH_AGREEMENT_TOL)


def operator_identity_checks(seed: int = 0, samples: int = 20, N: int = GRID_N) -> list[CheckResult]:
    """Inversion, semigroup, both power rules, annihilation and unit
    normalization, on the series algebra and on an ``N``-interval grid."""
    rng = np.random.default_rng(seed)
    return [*_series_identities(rng, samples), *_grid_identities(N)]


def run_checks(level: str = "quick", seed: int = 0) -> list[CheckResult]:
    """Run the quick or full suite; failures are reported, never raised."""
    if level not in ("quick", "full"):
        raise ValueError(f"level must be 'quick' or 'full', got {level!r}")
    full = level == "full"
    rng = np.random.default_rng(seed)
    samples = 20 if full else 5
    groups: list[Callable[[], Iterator[CheckResult]]] = [
        lambda: _series_identities(rng, samples),
        lambda: _grid_identities(GRID_N),
        lambda: _transition_checks(rng, 20 if full else 5),
        _solution_checks,
    ]
    if full:
        groups += [_diff_under_integral_checks, lambda: _path_agreement_checks(rng)]
    results = []
    for group in groups:
        try:
            results.extend(group())
        except Exception as exc:  # a crash is a failed check, not a crashed report
            name = getattr(group, "__name__", "check group")
            results.append(CheckResult(name, math.inf, 0.0, f"{type(exc).__name__}: {exc}"))
    return results

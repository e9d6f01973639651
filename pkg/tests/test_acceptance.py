"""End-to-end acceptance criteria, one PASS/FAIL line each.

Run alone with ``pytest -m acceptance -s`` or as part of the full suite;
the lines are repeated in the pytest summary either way.
"""

import math
import subprocess
import sys
import time

import mpmath as mp
import numpy as np
import pytest

import conftest
from fracpb.frac_core import MatrixPolynomial, mul_poly, rl_derivative
from fracpb.numeric_frac import Grid, SampledKernel, SampledMatrixFunction, check_diff_under_integral
from fracpb.numeric_frac import _unit_weights
from fracpb.solver import solve_inhomogeneous
from fracpb.specfun import alpha_exp
from fracpb.transition import peano_baker_exact, peano_baker_grid, verify_lemma4
from fracpb.validation import (
    operator_identity_checks,
    random_polynomial,
    worked_example_A,
    worked_example_problem,
)
from fracpb.validation import RANDOM_A_MAX_TERMS

pytestmark = pytest.mark.acceptance
unit_weights_cache_clear = _unit_weights.cache_clear

# pinned tolerances
COEFF_RTOL = 1e-12
SPOT_ATOL = 1e-9
SYMBOLIC_SECONDS = 1.0
IDENTITY_SECONDS = 30.0
RANDOM_A_COUNT = 20
CONSTANT_A_COUNT = 10
CONSTANT_A_NORM = 1.5
CONSTANT_A_TOL = 1e-9
DIFF_UNDER_INTEGRAL_TOL = 1e-3
DIFF_UNDER_INTEGRAL_N = 512
PATH_N = 512
PATH_TOL = 1e-3
PATH_MARGIN = 0.05
SUITE_SECONDS = 120.0

GOLDEN_CSV = (
    b"t,x1,x2\n"
    b"0.25,0.689189584,1.12837917\n"
    b"0.5,1.04788456,0.797884561\n"
    b"0.75,1.35220502,0.651470016\n"
    b"1,1.62837917,0.564189584\n"
)


def coefficient_gap(series, expected):
    """Largest relative coefficient error; inf when the exponent sets differ."""
    got = {round(g, 9): C for g, C in series.terms}
    if set(got) != set(expected):
        return math.inf
    worst = 0.0
    for g, want in expected.items():
        C, want = got[g], np.asarray(want)
        mask = want != 0
        if np.any(C[~mask] != 0):
            return math.inf
        worst = max(worst, float(np.max(np.abs(C[mask] / want[mask] - 1))))
    return worst


def test_symbolic_transition_matrix(criterion_line):
    start = time.perf_counter()
    worst, terms = 0.0, set()
    for a in (0.3, 0.5, 0.7):
        phi = peano_baker_exact(worked_example_A(), a, 1.0)
        g = math.gamma
        expected = {
            round(a, 9): np.eye(2) / g(a),
            round(2 * a + 1, 9): np.array([[0.0, a / g(2 * a + 1)], [0.0, 0.0]]),
        }
        worst = max(worst, coefficient_gap(phi.series, expected))
        terms.add((phi.terms_used, phi.terminated_exactly))
    elapsed = time.perf_counter() - start
    ok = worst <= COEFF_RTOL and terms == {(2, True)} and elapsed < SYMBOLIC_SECONDS
    assert criterion_line(1, ok, f"coefficient rel err {worst:.2e} <= {COEFF_RTOL:.0e}, terms {terms}, {elapsed:.3f}s")


def test_symbolic_solution(criterion_line):
    worst = 0.0
    for a in (0.3, 0.5, 0.7):
        sol = solve_inhomogeneous(worked_example_problem(a))
        g = math.gamma
        expected = {
            round(a, 9): [[0.0], [1 / g(a)]],
            round(a + 1, 9): [[1 / g(a + 1)], [0.0]],
            round(2 * a + 1, 9): [[a / g(2 * a + 1)], [0.0]],
        }
        worst = max(worst, coefficient_gap(sol.representation, expected))
    x = solve_inhomogeneous(worked_example_problem(0.5))(1.0)
    with mp.workdps(40):
        x1_ref = float(mp.mpf("0.5") / mp.gamma(2) + 1 / mp.gamma(mp.mpf("1.5")))
        x2_ref = float(1 / mp.gamma(mp.mpf("0.5")))
    spot = max(abs(x[0] - x1_ref), abs(x[1] - x2_ref))
    ok = worst <= COEFF_RTOL and spot <= SPOT_ATOL
    assert criterion_line(2, ok, f"coefficient rel err {worst:.2e} <= {COEFF_RTOL:.0e}, spot err {spot:.2e} <= {SPOT_ATOL:.0e}")


def test_operator_identities(criterion_line):
    unit_weights_cache_clear()  # time a cold run, not one served from earlier tests
    start = time.perf_counter()
    results = operator_identity_checks(seed=0)
    elapsed = time.perf_counter() - start
    failed = [r.name for r in results if not r.passed]
    ok = not failed and elapsed < IDENTITY_SECONDS
    detail = f"{len(results) - len(failed)}/{len(results)} identities within tolerance, {elapsed:.1f}s < {IDENTITY_SECONDS:.0f}s"
    for r in results:
        print("   ", r.line())
    assert criterion_line(3, ok, detail + (f"; failed: {failed}" if failed else ""))


def test_transition_residual(criterion_line):
    rng = np.random.default_rng(2024)
    tele = unexplained = excess = 0.0
    for i in range(RANDOM_A_COUNT):
        A = random_polynomial(rng, max_dim=3, max_degree=2)
        a = (0.3, 0.5, 0.7)[i % 3]
        phi = peano_baker_exact(A, a, 1.0, max_terms=RANDOM_A_MAX_TERMS)
        for prev, nxt in zip(phi.terms[:-1], phi.terms[1:]):
            lhs, rhs = rl_derivative(nxt, a), mul_poly(A, prev)
            scale = max(lhs.max_coefficient(), rhs.max_coefficient())
            tele = max(tele, (lhs - rhs).max_coefficient() / scale)
        rep = verify_lemma4(phi, A)
        unexplained = max(unexplained, rep.unexplained_residual)
        # the integrated residual may exceed the tail estimate by rounding only
        excess = max(excess, (rep.integrated_residual - rep.tail_estimate) / max(phi.series.max_coefficient(), 1.0))
    ok = tele <= COEFF_RTOL and unexplained <= COEFF_RTOL and excess <= COEFF_RTOL
    detail = (
        f"{RANDOM_A_COUNT} random A: telescoping {tele:.2e}, off-tail residual {unexplained:.2e}, "
        f"excess over tail {max(excess, 0.0):.2e} (all <= {COEFF_RTOL:.0e})"
    )
    assert criterion_line(4, ok, detail)


def test_constant_coefficients(criterion_line):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(CONSTANT_A_COUNT):
        M = rng.uniform(-1, 1, (2, 2))
        M *= rng.uniform(0.1, CONSTANT_A_NORM) / np.linalg.norm(M, 2)
        for a in (0.4, 0.8):
            phi = peano_baker_exact(MatrixPolynomial.constant(M), a, 1.0)
            for t in (0.25, 0.5, 1.0):
                worst = max(worst, float(np.max(np.abs(phi.eval(t) - alpha_exp(a, M, t)))))
    ok = worst <= CONSTANT_A_TOL
    assert criterion_line(5, ok, f"{CONSTANT_A_COUNT} constant A, max err {worst:.2e} <= {CONSTANT_A_TOL:.0e}")


def test_derivative_under_integral(criterion_line):
    a = 0.5
    kernels = {
        "phi = 1": (lambda T, S: np.ones_like(T), 1.0),
        "phi = (t-s)^(a-1)/Gamma(a)": (lambda T, S: np.full_like(T, 1 / math.gamma(a)), a),
    }
    parts, ok, largest = [], True, 0.0
    for label, (fn, rho) in kernels.items():
        res = [
            check_diff_under_integral(SampledKernel.from_callable(Grid(0.0, 1.0, N), fn, rho), a).residual
            for N in (DIFF_UNDER_INTEGRAL_N, 2 * DIFF_UNDER_INTEGRAL_N)
        ]
        ok &= res[0] <= DIFF_UNDER_INTEGRAL_TOL and res[1] < res[0]
        largest = max(largest, *res)
        parts.append(f"{label}: N=512 {res[0]:.2e}, N=1024 {res[1]:.2e}")
    detail = f"residual <= {DIFF_UNDER_INTEGRAL_TOL:.0e} at N=512 and decreasing on doubling; " + "; ".join(parts)
    if not ok and largest < 1e-9:
        detail += " (both kernels are integrated exactly, so the residual is rounding and cannot shrink)"
    assert criterion_line(6, ok, detail)


def test_exact_grid_agreement(criterion_line):
    grid = Grid(0.0, 1.0, PATH_N)
    exact = peano_baker_exact(worked_example_A(), 0.5, 1.0)
    approx, _ = peano_baker_grid(SampledMatrixFunction.from_callable(grid, worked_example_A().eval), 0.5)
    keep = grid.nodes >= grid.t0 + PATH_MARGIN
    err = float(np.max(np.abs(approx.node_values()[keep] - exact.eval(grid.nodes[keep]))))
    ok = err <= PATH_TOL
    assert criterion_line(7, ok, f"N={PATH_N}, max err for t >= {PATH_MARGIN} is {err:.2e} <= {PATH_TOL:.0e}")


def test_cli_end_to_end(criterion_line, example_file):
    runs = [
        subprocess.run(
            [sys.executable, "-m", "fracpb", "solve", str(example_file), "--samples", "4"],
            capture_output=True,
        )
        for _ in range(2)
    ]
    csv_ok = all(r.returncode == 0 and r.stdout == GOLDEN_CSV for r in runs)
    full = subprocess.run([sys.executable, "-m", "fracpb", "validate", "--full"], capture_output=True, text=True)
    elapsed = time.perf_counter() - conftest.SESSION_START
    ok = csv_ok and full.returncode == 0 and elapsed < SUITE_SECONDS
    detail = (
        f"golden CSV {'byte-identical' if csv_ok else 'MISMATCH'} over 2 runs, "
        f"validate --full exit {full.returncode}, session time {elapsed:.1f}s < {SUITE_SECONDS:.0f}s"
    )
    assert criterion_line(8, ok, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))

"""Command-line interface: ``fracpb solve | phi | validate | ml``.

Exit codes: 0 success, 1 bad input (parse or usage error), 2 a series did
not converge, 3 a validation check failed.  ``FRAC_TOL`` in the environment
sets the series tolerance; ``--tol`` wins over it.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import specfun
from .errors import FracError, NonConvergenceError, ProblemFileError
from .frac_core import FracPowerSeries
from .numeric_frac import Grid, SampledMatrixFunction
from .problem_file import load_problem
from .solver import EXACT, IvpProblem, Solution, solve_inhomogeneous
from .transition import DEFAULT_TOL, peano_baker_exact, peano_baker_grid
from .validation import run_checks

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGENCE = 2
EXIT_VALIDATION = 3

# values at or beyond this magnitude are printed in scientific notation
SCI_THRESHOLD = 1e6


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is our non-convergence code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def format_number(x: float) -> str:
    """Nine significant digits; scientific notation for ``|x| >= 1e6``."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"refusing to format non-finite value {x}")
    if x == 0:
        return "0"
    if abs(x) >= SCI_THRESHOLD:
        return f"{x:.8e}"
    return f"{x:.9g}"


def _resolve_tol(flag: float | None, problem: IvpProblem | None = None) -> float:
    if flag is not None:
        return flag
    env = os.environ.get("FRAC_TOL")
    if env:
        try:
            value = float(env)
        except ValueError:
            raise _InputError(f"FRAC_TOL={env!r} is not a number") from None
        if not value > 0:
            raise _InputError("FRAC_TOL must be positive")
        return value
    if problem is not None and problem.tol is not None:
        return problem.tol
    return DEFAULT_TOL


def _positive(kind):
    def parse(text: str):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return parse


def _origin_row(sol: Solution, t0: float) -> tuple[np.ndarray, float]:
    """Regular factor of ``x`` at ``t0`` and the exponent of its power factor."""
    rep = sol.representation
    if isinstance(rep, FracPowerSeries):
        if rep.is_zero():
            return np.zeros(rep.dim), 1.0
        sigma = rep.exponents[0]
        if sigma < 1:
            return rep.terms[0][1][:, 0].copy(), sigma
        return rep.eval(t0)[:, 0], 1.0
    sigma = rep.sigma
    if sigma < 1:
        return rep.values[0, :, 0].copy(), sigma
    return rep.node_values()[0, :, 0], 1.0


def trajectory_csv(p: IvpProblem, sol: Solution, samples: int, include_origin: bool = False) -> str:
    """CSV of ``x`` at ``t0 + k (T - t0) / samples`` for ``k = 1..samples``.

    With ``include_origin`` a first row at ``t0`` holds the regular factor
    ``g(t0)`` of ``x = g(t) (t - t0)^(exponent - 1)`` and an ``exponent``
    column is added (1 on every other row), so no infinite value is printed.
    """
    n = p.dim
    times = p.t0 + (p.T - p.t0) * np.arange(1, samples + 1) / samples
    values = np.atleast_2d(sol(times))
    header = ["t"] + [f"x{i + 1}" for i in range(n)]
    rows = []
    if include_origin:
        header.append("exponent")
        g0, sigma = _origin_row(sol, p.t0)
        rows.append([p.t0, *g0, sigma])
    for t, x in zip(times, values):
        rows.append([t, *x] + ([1.0] if include_origin else []))
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_number(v) for v in row) + "\n")
    return buf.getvalue()


def _power(t0: float, var: str = "t") -> str:
    return var if t0 == 0 else f"({var} - {format_number(t0)})"


def closed_form_text(x: FracPowerSeries, t0: float) -> str:
    """One line per component: ``x1(t) = c * t^p + ...``."""
    base = _power(t0)
    lines = []
    for i in range(x.dim):
        parts = []
        for g, C in x.terms:
            c = C[i, 0]
            if c == 0:
                continue
            p = g - 1
            if abs(p) <= 1e-12:
                body = format_number(abs(c))
            elif abs(p - 1) <= 1e-12:
                body = f"{format_number(abs(c))} * {base}"
            else:
                body = f"{format_number(abs(c))} * {base}^{format_number(p)}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        if not parts:
            text = "0"
        else:
            first_sign, first = parts[0]
            text = ("-" if first_sign == "-" else "") + first
            text += "".join(f" {s} {b}" for s, b in parts[1:])
        lines.append(f"x{i + 1}(t) = {text}")
    return "\n".join(lines) + "\n"


def _format_matrix(M: np.ndarray) -> str:
    return "\n".join("  " + "  ".join(f"{format_number(v):>15}" for v in row) for row in M)


def cmd_solve(args) -> int:
    p = load_problem(args.file)
    tol = _resolve_tol(args.tol, p)
    sol = solve_inhomogeneous(p, tol=tol, grid=args.grid)
    csv = trajectory_csv(p, sol, args.samples, args.include_origin)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv)
    else:
        sys.stdout.write(csv)
    if args.closed_form:
        if sol.path != EXACT:
            raise _InputError("--closed-form needs the exact path (drop --grid and the grid key)")
        text = closed_form_text(sol.representation, p.t0)
        # keep stdout a clean CSV when the trajectory is printed there
        (sys.stdout if args.out else sys.stderr).write(text)
    return EXIT_OK


def cmd_phi(args) -> int:
    p = load_problem(args.file)
    tol = _resolve_tol(args.tol, p)
    s = p.t0 if args.s is None else args.s
    t = args.t
    if s < p.t0:
        raise _InputError(f"s={s} lies before t0={p.t0}")
    if not t > s:
        raise _InputError(f"Phi(t, s) needs t > s, got t={t}, s={s}")
    A_s = p.A.reanchor(s)
    N = args.grid if args.grid is not None else p.grid
    if N is None:
        phi = peano_baker_exact(A_s, p.alpha, t, tol)
        M = phi.eval(t)
        report = phi.report
    else:
        samples = SampledMatrixFunction.from_callable(Grid(s, t, N), A_s.eval)
        values, report = peano_baker_grid(samples, p.alpha, tol)
        M = values.node_values()[-1]
    print(f"Phi(t={format_number(t)}, s={format_number(s)}) =")
    print(_format_matrix(M))
    print(f"path: {'exact' if N is None else f'grid (N={N})'}")
    print(f"terms_used: {report.terms_used}")
    print(f"terminated_exactly: {str(report.terminated_exactly).lower()}")
    print(f"tail_estimate: {format_number(report.tail_estimate)}")
    print(
        f"leading term: (t - s)^{format_number(p.alpha - 1)} / Gamma({format_number(p.alpha)}) * I, "
        "singular as t -> s"
    )
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_checks("full" if args.full else "quick", seed=args.seed)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed} passed, {failed} failed")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_ml(args) -> int:
    tol = _resolve_tol(args.tol)
    value = specfun.mittag_leffler(specfun.MlParams(args.alpha, args.beta), args.z, tol)
    print(f"{value:.16g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fracpb",
        description="Linear fractional systems D^alpha x = A(t) x + u(t) with weighted "
        "initial value J^(1-alpha) x(t0) = x0 (note: x0 is not x(t0)).",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tol_help = "series tolerance (default: FRAC_TOL, then the file's tol, then 1e-12)"

    sp = sub.add_parser("solve", help="solve a problem file and write the trajectory as CSV")
    sp.add_argument("file")
    sp.add_argument("--samples", type=_positive(int), default=100, help="points in (t0, T] (default 100)")
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.add_argument("--closed-form", action="store_true", help="also print the exact series")
    sp.add_argument("--grid", type=_positive(int), help="use the grid path with N intervals")
    sp.add_argument(
        "--include-origin",
        action="store_true",
        help="add a t0 row with the regular factor and an exponent column",
    )
    sp.add_argument("--tol", type=_positive(float), help=tol_help)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("phi", help="print the state-transition matrix Phi(t, s)")
    sp.add_argument("file")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--s", type=float, help="initial time (default t0)")
    sp.add_argument("--grid", type=_positive(int), help="use the grid path with N intervals")
    sp.add_argument("--tol", type=_positive(float), help=tol_help)
    sp.set_defaults(func=cmd_phi)

    sp = sub.add_parser("validate", help="run the operator identity suites")
    sp.add_argument("--full", action="store_true", help="include the slower checks")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("ml", help="evaluate the Mittag-Leffler function E_{alpha,beta}(z)")
    sp.add_argument("alpha", type=float)
    sp.add_argument("beta", type=float)
    sp.add_argument("z", type=float)
    sp.add_argument("--tol", type=_positive(float), help=tol_help)
    sp.set_defaults(func=cmd_ml)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None and hasattr(exc.report, "summary"):
            print(exc.report.summary(), file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ProblemFileError, _InputError, FracError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

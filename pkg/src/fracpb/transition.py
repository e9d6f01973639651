"""State-transition matrices as generalized Peano-Baker series.

``Phi(t, t0) = sum_k P_k`` with ``P_0 = (t - t0)^(alpha - 1) / Gamma(alpha) I``
and ``P_{k+1} = J^alpha (A(t) P_k)``.  For a matrix-polynomial ``A`` every
term is a finite fractional power series and the construction is exact up to
truncation.  For sampled ``A`` the same recursion runs on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

from . import specfun
from .errors import DomainError, NonConvergenceError
from .frac_core import (
    FracPowerSeries,
    MatrixPolynomial,
    base_term,
    mul_poly,
    rl_derivative,
    rl_integral,
)
from .numeric_frac import (
    SampledMatrixFunction,
    grid_rl_integral,
    pointwise_product,
)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_TERMS = 64

T = TypeVar("T")


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-term sup-norms over ``(t0, T]`` and the ratios between them.

    ``sup_norms`` includes the first omitted term when there is one.  The
    verdict is a heuristic for uniform convergence: ``converging`` needs the
    last three ratios below 1 (or exact termination).
    """

    sup_norms: tuple[float, ...]
    ratios: tuple[float, ...]
    verdict: str
    terms_used: int
    terminated_exactly: bool
    tail_estimate: float

    def summary(self) -> str:
        lines = [
            f"verdict: {self.verdict}",
            f"terms_used: {self.terms_used}",
            f"terminated_exactly: {str(self.terminated_exactly).lower()}",
            f"tail_estimate: {self.tail_estimate:.3e}",
        ]
        if self.ratios:
            last = ", ".join(f"{r:.3g}" for r in self.ratios[-5:])
            lines.append(f"last ratios: {last}")
        return "\n".join(lines)


def _verdict(ratios: Sequence[float], exact: bool) -> str:
    if exact:
        return "converging"
    if len(ratios) < 3:
        return "inconclusive"
    last = ratios[-3:]
    if all(r < 1 for r in last):
        return "converging"
    if all(r >= 1 for r in last):
        return "diverging"
    return "inconclusive"


def _iterate(
    first: T,
    step: Callable[[T], T],
    measure: Callable[[T], float],
    is_zero: Callable[[T], bool],
    tol: float,
    max_terms: int,
    what: str,
) -> tuple[list[T], T | None, ConvergenceReport]:
    """Run ``term_{k+1} = step(term_k)`` until exact zero, ``measure < tol``,
    or ``max_terms`` kept terms; returns kept terms, first omitted term, report."""
    if max_terms < 1:
        raise DomainError("max_terms must be at least 1")
    terms = [first]
    norms = [measure(first)]
    omitted = None
    exact = False
    while True:
        cand = step(terms[-1])
        if is_zero(cand):
            exact = True
            break
        norms.append(measure(cand))
        if norms[-1] < tol:
            omitted = cand
            break
        if len(terms) >= max_terms:
            omitted = cand
            break
        terms.append(cand)
    ratios = tuple(
        b / a if a > 0 else math.inf for a, b in zip(norms[:-1], norms[1:])
    )
    report = ConvergenceReport(
        sup_norms=tuple(norms),
        ratios=ratios,
        verdict=_verdict(ratios, exact),
        terms_used=len(terms),
        terminated_exactly=exact,
        tail_estimate=0.0 if exact else norms[-1],
    )
    if omitted is not None and norms[-1] >= tol and ratios and ratios[-1] >= 1:
        raise NonConvergenceError(
            f"{what} not converged after {max_terms} terms "
            f"(last ratio {ratios[-1]:.3g})",
            report,
        )
    return terms, omitted, report


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Truncated Peano-Baker series for ``Phi(t, origin)``.

    ``terms`` are the kept terms ``P_0..P_{K-1}``; ``omitted`` is ``P_K``,
    or ``None`` when the series terminated exactly.
    """

    series: FracPowerSeries
    alpha: float
    terms_used: int
    terminated_exactly: bool
    tail_estimate: float
    terms: tuple[FracPowerSeries, ...]
    omitted: FracPowerSeries | None
    horizon: float
    report: ConvergenceReport

    @property
    def origin(self) -> float:
        return self.series.origin

    def eval(self, t) -> np.ndarray:
        return self.series.eval(t)

    __call__ = eval


def _check_alpha(alpha: float):
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")


def peano_baker_exact(
    A: MatrixPolynomial,
    alpha: float,
    horizon: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> TransitionMatrix:
    """Build ``Phi(t, A.origin)`` on ``(origin, horizon]`` over the series algebra.

    Stops when the next term is identically zero, when its sup-norm bound
    (regular factor for singular terms) drops below ``tol``, or after
    ``max_terms`` kept terms.

    Raises
    ------
    NonConvergenceError
        If the cap is reached while term norms are still not decreasing.
    """
    _check_alpha(alpha)
    if not horizon > A.origin:
        raise DomainError(f"horizon {horizon} must exceed the origin {A.origin}")
    length = horizon - A.origin
    terms, omitted, report = _iterate(
        base_term(alpha, A.dim, A.origin),
        lambda P: rl_integral(mul_poly(A, P), alpha),
        lambda P: P.sup_bound(length),
        FracPowerSeries.is_zero,
        tol,
        max_terms,
        "Peano-Baker series",
    )
    series = FracPowerSeries(
        [term for P in terms for term in P.terms], A.origin, (A.dim, A.dim)
    )
    return TransitionMatrix(
        series=series,
        alpha=alpha,
        terms_used=report.terms_used,
        terminated_exactly=report.terminated_exactly,
        tail_estimate=report.tail_estimate,
        terms=tuple(terms),
        omitted=omitted,
        horizon=horizon,
        report=report,
    )


def peano_baker_grid(
    A: SampledMatrixFunction,
    alpha: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> tuple[SampledMatrixFunction, ConvergenceReport]:
    """Grid version of :func:`peano_baker_exact` for sampled ``A``.

    The result carries the power factor ``(t - t0)^(alpha - 1)`` of the base
    term, so it stays finite at ``t0``.
    """
    _check_alpha(alpha)
    if A.left_exponent is not None:
        raise DomainError("peano_baker_grid needs a regular coefficient matrix")
    n = A.dim
    base_vals = np.broadcast_to(np.eye(n) * specfun.rgamma(alpha), (A.grid.N + 1, n, n))
    base = SampledMatrixFunction(A.grid, base_vals, alpha)
    terms, _, report = _iterate(
        base,
        lambda P: grid_rl_integral(pointwise_product(A, P), alpha),
        SampledMatrixFunction.sup_norm,
        lambda P: not np.any(P.values),
        tol,
        max_terms,
        "Peano-Baker series (grid)",
    )
    total = terms[0]
    for P in terms[1:]:
        total = total + P
    return total.with_exponent(alpha), report


@dataclass(frozen=True)
class TransitionResidualReport:
    """Residual of ``D^alpha Phi = A Phi`` and of ``J^(1-alpha) Phi -> I``.

    ``residual`` is the exact series ``D^alpha Phi - A Phi``.  Truncation
    after ``K`` terms leaves exactly ``-D^alpha P_K`` = ``-A P_{K-1}``;
    ``unexplained_residual`` is what remains after removing that, relative
    to the size of ``A Phi``.  ``integrated_residual`` is the sup-norm bound
    of ``J^alpha`` applied to the residual, which equals the bound on the
    omitted term and is the quantity compared against ``tail_estimate``.
    """

    residual: FracPowerSeries
    max_residual: float
    unexplained_residual: float
    integrated_residual: float
    tail_estimate: float
    telescoping_errors: tuple[float, ...]
    initial_condition_error: float


def _relative_gap(x: FracPowerSeries, y: FracPowerSeries) -> float:
    scale = max(x.max_coefficient(), y.max_coefficient())
    if scale == 0:
        return 0.0
    return (x - y).max_coefficient() / scale


def verify_lemma4(phi: TransitionMatrix, A: MatrixPolynomial) -> TransitionResidualReport:
    """Check the transition-matrix initial value problem on the series algebra."""
    alpha = phi.alpha
    length = phi.horizon - phi.origin
    A_Phi = mul_poly(A, phi.series)
    residual = rl_derivative(phi.series, alpha) - A_Phi
    if phi.omitted is None:
        predicted = FracPowerSeries.zero(residual.shape, residual.origin)
    else:
        predicted = -mul_poly(A, phi.terms[-1])
    scale = max(A_Phi.max_coefficient(), 1e-300)
    unexplained = (residual - predicted).max_coefficient() / scale

    chain = list(phi.terms) + ([phi.omitted] if phi.omitted is not None else [])
    telescoping = tuple(
        _relative_gap(rl_derivative(nxt, alpha), mul_poly(A, prev))
        for prev, nxt in zip(chain[:-1], chain[1:])
    )
    limit = rl_integral(phi.series, 1 - alpha).limit_at_origin() if alpha < 1 else (
        phi.series.limit_at_origin()
    )
    ic_error = float(np.max(np.abs(limit - np.eye(A.dim))))
    return TransitionResidualReport(
        residual=residual,
        max_residual=residual.max_coefficient(),
        unexplained_residual=unexplained,
        integrated_residual=rl_integral(residual, alpha).sup_bound(length),
        tail_estimate=phi.tail_estimate,
        telescoping_errors=telescoping,
        initial_condition_error=ic_error,
    )


def two_point_phi(
    A: MatrixPolynomial,
    alpha: float,
    s: float,
    t: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> np.ndarray:
    """``Phi(t, s)``: the series rebuilt with ``A`` re-expanded about ``s``."""
    if not t > s:
        raise DomainError(f"Phi(t, s) needs t > s, got t={t}, s={s}")
    return peano_baker_exact(A.reanchor(s), alpha, t, tol, max_terms).eval(t)


@dataclass(frozen=True, eq=False)
class TwoPointKernel:
    """``Phi(t, s) = sum_p (s - origin)^p K_p(t - s)`` for polynomial ``A``.

    Each ``K_p`` is a series in the lag ``t - s`` (stored with origin 0).
    ``omitted`` holds the first omitted Peano-Baker term in the same form.
    """

    origin: float
    alpha: float
    parts: dict[int, FracPowerSeries]
    omitted: dict[int, FracPowerSeries] | None
    report: ConvergenceReport

    def at(self, s: float) -> FracPowerSeries:
        """The one-point series ``Phi(., s)`` anchored at ``s``."""
        return _collapse(self.parts, s - self.origin, s)


def _collapse(parts: dict[int, FracPowerSeries], sigma: float, anchor: float) -> FracPowerSeries:
    shape = next(iter(parts.values())).shape
    return FracPowerSeries(
        [(g, c * sigma**p) for p, K in parts.items() for g, c in K.terms], anchor, shape
    )


def _lag_coefficients(A: MatrixPolynomial) -> list[tuple[int, int, np.ndarray]]:
    """``A(s + lag)`` as ``(p, j, B)`` triples: ``B (s - origin)^p lag^j``."""
    return [
        (m - j, j, math.comb(m, j) * Am)
        for m, Am in A.coeffs.items()
        for j in range(m + 1)
    ]


@dataclass(frozen=True, eq=False)
class _KernelTerm:
    """Peano-Baker term ``k`` of ``Phi(t, s)`` as a dense coefficient array.

    ``coeffs[p, j]`` multiplies ``(s - origin)^p lag^((k + 1) alpha + j - 1)``.
    """

    k: int
    coeffs: np.ndarray

    def exponent(self, alpha: float, j: int) -> float:
        return (self.k + 1) * alpha + j


def _triangle_power_max(p: float, q: float, length: float) -> float:
    """``max (s - t0)^p lag^q`` over ``s - t0 + lag <= length``, for ``p, q >= 0``."""
    log = (p + q) * math.log(length)
    if p > 0 and q > 0:
        log += p * math.log(p) + q * math.log(q) - (p + q) * math.log(p + q)
    return math.exp(log)


def _kernel_bound(term: _KernelTerm, alpha: float, length: float) -> float:
    """Sup-norm bound over ``s - t0 + lag <= length``.

    Singular lag powers are measured through their regular factor, as in
    :meth:`FracPowerSeries.sup_bound`.
    """
    sizes = np.max(np.abs(term.coeffs), axis=(2, 3))
    p_idx, j_idx = np.nonzero(sizes)
    if p_idx.size == 0:
        return 0.0
    shift = min(term.exponent(alpha, int(j_idx.min())), 1.0)
    return sum(
        sizes[p, j] * _triangle_power_max(p, term.exponent(alpha, j) - shift, length)
        for p, j in zip(p_idx.tolist(), j_idx.tolist())
    )


def _kernel_parts(terms: Sequence[_KernelTerm], alpha: float, n: int) -> dict[int, FracPowerSeries]:
    collected: dict[int, list] = {}
    for term in terms:
        for p, j in zip(*np.nonzero(np.any(term.coeffs, axis=(2, 3)))):
            collected.setdefault(int(p), []).append((term.exponent(alpha, int(j)), term.coeffs[p, j]))
    return {p: FracPowerSeries(c, 0.0, (n, n)) for p, c in sorted(collected.items())}


def two_point_kernel(
    A: MatrixPolynomial,
    alpha: float,
    horizon: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> TwoPointKernel:
    """Peano-Baker series for ``Phi(t, s)`` with ``s`` kept symbolic.

    Each term is ``J^alpha`` (anchored at ``s``) of ``A(t)`` times the
    previous term, with ``A(t)`` expanded in powers of ``s - origin`` and of
    the lag ``t - s``.  The sup-norm of a term is bounded over
    ``origin <= s < t <= horizon`` using ``s - origin + (t - s) <= horizon - origin``.
    """
    _check_alpha(alpha)
    if not horizon > A.origin:
        raise DomainError(f"horizon {horizon} must exceed the origin {A.origin}")
    length = horizon - A.origin
    lag_coeffs = _lag_coefficients(A)
    n = A.dim
    d = A.degree

    def step(term: _KernelTerm) -> _KernelTerm:
        P, J = term.coeffs.shape[:2]
        if d < 0:
            return _KernelTerm(term.k + 1, np.zeros((1, 1, n, n)))
        out = np.zeros((P + d, J + d, n, n))
        for p, j, B in lag_coeffs:
            out[p : p + P, j : j + J] += np.einsum("ab,pjbc->pjac", B, term.coeffs)
        # J^alpha maps lag^(g - 1) to Gamma(g) / Gamma(g + alpha) lag^(g + alpha - 1)
        g = [term.exponent(alpha, j) for j in range(J + d)]
        out *= np.array([specfun.gamma_ratio(x, x + alpha) for x in g])[None, :, None, None]
        return _KernelTerm(term.k + 1, out)

    first = _KernelTerm(0, (np.eye(n) * specfun.rgamma(alpha))[None, None])
    terms, omitted, report = _iterate(
        first,
        step,
        lambda term: _kernel_bound(term, alpha, length),
        lambda term: not np.any(term.coeffs),
        tol,
        max_terms,
        "two-point Peano-Baker series",
    )
    return TwoPointKernel(
        A.origin,
        alpha,
        _kernel_parts(terms, alpha, n),
        None if omitted is None else _kernel_parts([omitted], alpha, n),
        report,
    )

"""Gamma, Mittag-Leffler and matrix alpha-exponential functions.

All series here are summed directly from their Taylor expansions.  That is
accurate for the moderate arguments met in desk-scale fractional systems;
for large negative arguments the alternating terms cancel and only the
absolute error relative to the largest term is controlled.
"""

from __future__ import annotations

import contextlib
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .errors import DomainError, NonConvergenceError, PoleError

DEFAULT_TOL = 1e-12
DEFAULT_MAX_TERMS = 1000

# past this, math.gamma overflows and ratios go through lgamma
_GAMMA_DIRECT_LIMIT = 170.0

_EPS = float(np.finfo(float).eps)
_LOG_MAX = math.log(float(np.finfo(float).max))

_gamma_impl: Callable[[float], float] = math.gamma


@contextlib.contextmanager
def use_gamma(fn: Callable[[float], float]) -> Iterator[None]:
    """Temporarily replace the Gamma implementation used by the library.

    Test hook: lets validation runs prove they detect a broken Gamma.
    Not thread safe.
    """
    global _gamma_impl
    previous = _gamma_impl
    _gamma_impl = fn
    try:
        yield
    finally:
        _gamma_impl = previous


def gamma(x: float) -> float:
    """Gamma function for real ``x`` that is not a non-positive integer.

    Raises
    ------
    PoleError
        If ``x`` is 0, -1, -2, ...
    OverflowError
        If the result exceeds the double range (``x`` above ~171.6).
    """
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x:g}")
    try:
        return _gamma_impl(x)
    except OverflowError:
        raise OverflowError(f"Gamma({x:g}) overflows double precision") from None


def rgamma(x: float) -> float:
    """Reciprocal Gamma, ``1/Gamma(x)``, which is zero at the poles."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        return 0.0
    if x > _GAMMA_DIRECT_LIMIT:
        return math.exp(-math.lgamma(x))
    return 1.0 / gamma(x)


def gamma_ratio(x: float, y: float) -> float:
    """``Gamma(x) / Gamma(y)`` for positive ``x`` and ``y``, overflow safe."""
    if x < _GAMMA_DIRECT_LIMIT and y < _GAMMA_DIRECT_LIMIT:
        return gamma(x) / gamma(y)
    if x <= 0 or y <= 0:
        raise DomainError("gamma_ratio needs positive arguments past the direct range")
    return math.exp(math.lgamma(x) - math.lgamma(y))


def beta(a: float, b: float) -> float:
    """Euler Beta function ``B(a, b) = Gamma(a) Gamma(b) / Gamma(a + b)``."""
    if a <= 0 or b <= 0:
        raise DomainError(f"beta needs positive arguments, got ({a}, {b})")
    if a + b < _GAMMA_DIRECT_LIMIT:
        return gamma(a) * gamma(b) / gamma(a + b)
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


@dataclass(frozen=True)
class MlParams:
    """Parameters ``(alpha, beta)`` of the two-parameter Mittag-Leffler function."""

    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        if not (0 < self.alpha <= 2):
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")


class MlSum(NamedTuple):
    value: float
    terms: int
    tail_bound: float


def _ml_term(z: float, k: int, a: float, b: float) -> float:
    x = a * k + b
    if x < _GAMMA_DIRECT_LIMIT:
        try:
            zk = z**k
        except OverflowError:
            zk = math.inf
        if math.isfinite(zk):
            return zk / gamma(x)
    if z == 0:
        return 0.0
    sign = -1.0 if (z < 0 and k % 2) else 1.0
    log = k * math.log(abs(z)) - math.lgamma(x)
    if log > _LOG_MAX:
        raise OverflowError(f"Mittag-Leffler term {k} at z={z:g} overflows double precision")
    return sign * math.exp(log)


def ml_series(
    p: MlParams,
    z: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> MlSum:
    """Sum ``E_{alpha,beta}(z)`` and return the value, term count and tail bound.

    Summation stops after term ``K`` once ``|t_K|`` and the geometric bound
    ``|t_{K+1}| / (1 - r)`` on the remainder are both below
    ``tol * max(1, |partial sum|)``.  Here ``r`` is the ratio of the next two
    terms; term ratios decrease monotonically because ``log Gamma`` is convex,
    so the bound is rigorous.

    A ``RuntimeWarning`` is issued when cancellation among large terms makes
    the rounding error exceed the requested tolerance.

    Raises
    ------
    NonConvergenceError
        If the stopping rule is not met within ``max_terms`` terms.
    OverflowError
        If a term exceeds the double range (large positive ``z``, small ``alpha``).
    """
    a, b = p.alpha, p.beta
    z = float(z)
    term = _ml_term(z, 0, a, b)
    terms = [term]
    total = term
    biggest = abs(term)
    k = 0
    while True:
        nxt = _ml_term(z, k + 1, a, b)
        ratio = abs(z) * gamma_ratio(a * (k + 1) + b, a * (k + 2) + b)
        scale = tol * max(1.0, abs(total))
        if ratio < 1.0:
            tail = abs(nxt) / (1.0 - ratio)
            if abs(term) <= scale and tail <= scale:
                if 4 * _EPS * biggest > scale:
                    warnings.warn(
                        f"E_{{{a},{b}}}({z}): cancellation among terms up to "
                        f"{biggest:.3g} limits accuracy to about {4 * _EPS * biggest:.1g}",
                        RuntimeWarning,
                        stacklevel=3,
                    )
                return MlSum(math.fsum(terms), k + 1, tail)
        k += 1
        if k >= max_terms:
            raise NonConvergenceError(
                f"Mittag-Leffler series E_{{{a},{b}}}({z}) not converged "
                f"after {max_terms} terms"
            )
        term = nxt
        biggest = max(biggest, abs(term))
        terms.append(term)
        total += term


def mittag_leffler(
    p: MlParams,
    z: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> float:
    """Two-parameter Mittag-Leffler function ``sum_k z^k / Gamma(alpha k + beta)``."""
    return ml_series(p, z, tol, max_terms).value


def matrix_ml(
    p: MlParams,
    M,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> np.ndarray:
    """Matrix Mittag-Leffler function ``sum_k M^k / Gamma(alpha k + beta)``.

    Powers of ``M`` are accumulated as a running product, so defective and
    nilpotent matrices need no special treatment.  The sum stops when the
    max-norm of the running term falls below ``tol * max(1, |S|_max)`` for
    three consecutive terms.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"matrix_ml needs a square matrix, got shape {M.shape}")
    a, b = p.alpha, p.beta
    term = np.eye(M.shape[0]) * rgamma(b)
    total = term.copy()
    small = 0
    for k in range(1, max_terms + 1):
        term = (term @ M) * gamma_ratio(a * (k - 1) + b, a * k + b)
        total += term
        if np.max(np.abs(term), initial=0.0) < tol * max(1.0, np.max(np.abs(total))):
            small += 1
            if small == 3:
                return total
        else:
            small = 0
    raise NonConvergenceError(
        f"matrix Mittag-Leffler series not converged after {max_terms} terms"
    )


def alpha_exp(
    alpha: float,
    A,
    t: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> np.ndarray:
    """Matrix alpha-exponential ``t^(alpha-1) E_{alpha,alpha}(A t^alpha)``.

    This is the state-transition matrix of ``D^alpha x = A x`` for constant
    ``A``; with ``alpha = 1`` it is the ordinary ``expm(t A)``.
    """
    if not (0 < alpha <= 1):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not t > 0:
        raise DomainError(f"alpha_exp is singular at t <= 0, got t={t}")
    A = np.asarray(A, dtype=float)
    return t ** (alpha - 1) * matrix_ml(MlParams(alpha, alpha), A * t**alpha, tol, max_terms)

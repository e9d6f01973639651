"""Exact algebra of generalized fractional power series.

A :class:`FracPowerSeries` is a finite sum ``sum_j C_j (t - t0)^(gamma_j - 1)``
with matrix coefficients.  Riemann-Liouville integrals and derivatives act on
each term through the power rules

    J^a (t - t0)^(g - 1) = Gamma(g) / Gamma(g + a) (t - t0)^(g + a - 1)
    D^a (t - t0)^(g - 1) = Gamma(g) / Gamma(g - a) (t - t0)^(g - a - 1)

so every operation here is exact up to floating-point rounding.  Vectors are
carried as ``n x 1`` series.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np

from . import specfun
from .errors import DimensionError, DomainError

EXPONENT_TOL = 1e-12
POLE_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _same_origin(x: float, y: float) -> bool:
    return math.isclose(x, y, rel_tol=0.0, abs_tol=EXPONENT_TOL)


class FracPowerSeries:
    """Finite fractional power series ``sum_j C_j (t - origin)^(gamma_j - 1)``.

    Terms are normalized on construction: sorted by exponent, terms whose
    exponents agree to within ``EXPONENT_TOL`` are merged, and all-zero
    coefficients are dropped.  Instances are immutable.

    Parameters
    ----------
    terms : iterable of (gamma, matrix)
        Exponents must be positive so that each term is locally integrable.
    origin : float
        The anchor ``t0``.
    shape : tuple of int, optional
        Coefficient shape; required when ``terms`` is empty.
    """

    __slots__ = ("_origin", "_shape", "_terms")

    def __init__(self, terms: Iterable = (), origin: float = 0.0, shape=None):
        raw = [(float(g), np.asarray(c, dtype=float)) for g, c in terms]
        for g, c in raw:
            if c.ndim == 1:
                raise DimensionError("coefficients must be 2-D; use an (n, 1) column for vectors")
        if shape is None:
            if not raw:
                raise DimensionError("shape is required for an empty series")
            shape = raw[0][1].shape
        shape = tuple(int(s) for s in shape)
        for g, c in raw:
            if c.shape != shape:
                raise DimensionError(f"coefficient shape {c.shape} differs from {shape}")
            if not g > 0:
                raise DomainError(f"exponent {g} is not positive; term not locally integrable")
        self._origin = float(origin)
        self._shape = shape
        if not raw:
            self._terms = ()
            return
        gammas = np.array([g for g, _ in raw])
        order = np.argsort(gammas, kind="stable")
        gammas = gammas[order]
        coeffs = np.stack([raw[i][1] for i in order])
        # a term joins the current group while within EXPONENT_TOL of its first exponent
        starts = [0]
        for i in range(1, gammas.size):
            if gammas[i] - gammas[starts[-1]] > EXPONENT_TOL:
                starts.append(i)
        merged = np.add.reduceat(coeffs, starts, axis=0)
        keep = np.any(merged != 0, axis=(1, 2))
        merged = _frozen(merged[keep])
        self._terms = tuple(zip(gammas[starts][keep].tolist(), merged))

    @classmethod
    def zero(cls, shape, origin: float = 0.0) -> FracPowerSeries:
        return cls((), origin, shape)

    @classmethod
    def constant(cls, value, origin: float = 0.0) -> FracPowerSeries:
        """The constant function ``value`` (exponent 1)."""
        value = np.atleast_2d(np.asarray(value, dtype=float))
        return cls([(1.0, value)], origin, value.shape)

    @classmethod
    def column(cls, terms: Iterable, origin: float = 0.0, dim: int | None = None):
        """Vector-valued series from ``(gamma, vector)`` pairs, stored as ``n x 1``."""
        terms = [(g, np.asarray(v, dtype=float).reshape(-1, 1)) for g, v in terms]
        shape = None if dim is None else (dim, 1)
        return cls(terms, origin, shape)

    @property
    def origin(self) -> float:
        return self._origin

    @property
    def shape(self) -> tuple[int, int]:
        return self._shape

    @property
    def dim(self) -> int:
        return self._shape[0]

    @property
    def terms(self) -> tuple[tuple[float, np.ndarray], ...]:
        return self._terms

    @property
    def exponents(self) -> tuple[float, ...]:
        return tuple(g for g, _ in self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __repr__(self) -> str:
        body = ", ".join(f"({g:.6g}, {c.tolist()})" for g, c in self._terms)
        return f"FracPowerSeries([{body}], origin={self._origin:g}, shape={self._shape})"

    # evaluation

    def eval(self, t) -> np.ndarray:
        """Value at ``t`` (scalar or array); array input adds a leading axis.

        Points at the origin are allowed only when every exponent is >= 1.
        """
        t_arr = np.asarray(t, dtype=float)
        x = t_arr - self._origin
        if np.any(x < 0):
            raise DomainError(f"series anchored at {self._origin:g} evaluated before its origin")
        if np.any(x == 0) and self._terms and self._terms[0][0] < 1:
            raise DomainError("series has singular terms; it cannot be evaluated at its origin")
        x = x[..., None, None]
        out = np.zeros(t_arr.shape + self._shape)
        for g, c in self._terms:
            out = out + c * x ** (g - 1)
        return out

    __call__ = eval

    def sup_bound(self, length: float) -> float:
        """Upper bound on the max-norm over ``(origin, origin + length]``.

        The leading singular factor ``(t - t0)^(gamma_min - 1)`` is excluded
        when ``gamma_min < 1``, so the bound measures the regular factor.
        """
        if not self._terms:
            return 0.0
        g0 = self._terms[0][0]
        regular = sum(np.max(np.abs(c)) * length ** (g - g0) for g, c in self._terms)
        if g0 >= 1:
            regular *= length ** (g0 - 1)
        return float(regular)

    def max_coefficient(self) -> float:
        return max((float(np.max(np.abs(c))) for _, c in self._terms), default=0.0)

    def limit_at_origin(self) -> np.ndarray:
        """``lim_{t -> origin+}`` of the series; ``inf`` entries where it diverges."""
        out = np.zeros(self._shape)
        for g, c in self._terms:
            if g < 1 - EXPONENT_TOL:
                out = np.where(c != 0, np.inf * np.sign(c), out)
            elif abs(g - 1) <= EXPONENT_TOL:
                out = out + c
        return out

    # linear structure

    def _check_compatible(self, other: FracPowerSeries):
        if self._shape != other._shape:
            raise DimensionError(f"shapes {self._shape} and {other._shape} differ")
        if not _same_origin(self._origin, other._origin):
            raise DimensionError(f"origins {self._origin} and {other._origin} differ")

    def __add__(self, other: FracPowerSeries) -> FracPowerSeries:
        if not isinstance(other, FracPowerSeries):
            return NotImplemented
        self._check_compatible(other)
        return FracPowerSeries(self._terms + other._terms, self._origin, self._shape)

    def __neg__(self) -> FracPowerSeries:
        return FracPowerSeries([(g, -c) for g, c in self._terms], self._origin, self._shape)

    def __sub__(self, other: FracPowerSeries) -> FracPowerSeries:
        if not isinstance(other, FracPowerSeries):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar: float) -> FracPowerSeries:
        if isinstance(scalar, FracPowerSeries):
            return NotImplemented
        return FracPowerSeries(
            [(g, c * float(scalar)) for g, c in self._terms], self._origin, self._shape
        )

    __rmul__ = __mul__

    def __matmul__(self, M) -> FracPowerSeries:
        """Right product with a constant matrix or vector."""
        M = np.asarray(M, dtype=float)
        if M.ndim == 1:
            M = M.reshape(-1, 1)
        if M.shape[0] != self._shape[1]:
            raise DimensionError(f"cannot multiply {self._shape} series by {M.shape}")
        return FracPowerSeries(
            [(g, c @ M) for g, c in self._terms], self._origin, (self._shape[0], M.shape[1])
        )

    def __rmatmul__(self, M) -> FracPowerSeries:
        """Left product with a constant matrix."""
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[1] != self._shape[0]:
            raise DimensionError(f"cannot multiply {M.shape} by {self._shape} series")
        return FracPowerSeries(
            [(g, M @ c) for g, c in self._terms], self._origin, (M.shape[0], self._shape[1])
        )

    def entry(self, i: int, j: int = 0) -> FracPowerSeries:
        """Scalar (1 x 1) series of entry ``(i, j)``."""
        return FracPowerSeries(
            [(g, c[i : i + 1, j : j + 1]) for g, c in self._terms], self._origin, (1, 1)
        )

    def with_origin(self, origin: float) -> FracPowerSeries:
        """Same coefficients anchored at a different point."""
        return FracPowerSeries(self._terms, origin, self._shape)

    def allclose(self, other: FracPowerSeries, rtol: float = 1e-12, atol: float = 0.0) -> bool:
        """Termwise comparison of exponents and coefficients."""
        if self._shape != other._shape or len(self) != len(other):
            return False
        if not _same_origin(self._origin, other._origin):
            return False
        for (g1, c1), (g2, c2) in zip(self._terms, other._terms):
            if abs(g1 - g2) > EXPONENT_TOL:
                return False
            if not np.allclose(c1, c2, rtol=rtol, atol=atol):
                return False
        return True


def base_term(alpha: float, dim: int, origin: float = 0.0) -> FracPowerSeries:
    """``(t - t0)^(alpha - 1) / Gamma(alpha)`` times the identity."""
    return FracPowerSeries([(alpha, np.eye(dim) / specfun.gamma(alpha))], origin, (dim, dim))


class MatrixPolynomial:
    """Matrix polynomial ``A(t) = sum_m A_m (t - origin)^m``.

    Parameters
    ----------
    coeffs : mapping or iterable of (m, matrix)
        Non-negative integer powers; repeated powers are summed.
    origin : float
    dim : int, optional
        Required when ``coeffs`` is empty.
    """

    __slots__ = ("_origin", "_dim", "_coeffs")

    def __init__(self, coeffs: Mapping | Iterable = (), origin: float = 0.0, dim: int | None = None):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[int, np.ndarray] = {}
        for m, A in items:
            if int(m) != m or m < 0:
                raise DomainError(f"polynomial powers must be non-negative integers, got {m}")
            A = np.asarray(A, dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise DimensionError(f"coefficient of power {m} is not square: {A.shape}")
            if dim is None:
                dim = A.shape[0]
            if A.shape != (dim, dim):
                raise DimensionError(f"coefficient of power {m} has shape {A.shape}, expected {dim}x{dim}")
            acc[int(m)] = acc.get(int(m), np.zeros((dim, dim))) + A
        if dim is None:
            raise DimensionError("dim is required for an empty polynomial")
        self._origin = float(origin)
        self._dim = int(dim)
        self._coeffs = {m: _frozen(A) for m, A in sorted(acc.items()) if np.any(A != 0)}

    @classmethod
    def constant(cls, A, origin: float = 0.0) -> MatrixPolynomial:
        A = np.asarray(A, dtype=float)
        return cls({0: A}, origin, A.shape[0])

    @property
    def origin(self) -> float:
        return self._origin

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def coeffs(self) -> dict[int, np.ndarray]:
        return dict(self._coeffs)

    @property
    def degree(self) -> int:
        return max(self._coeffs, default=-1)

    def is_zero(self) -> bool:
        return not self._coeffs

    def __repr__(self) -> str:
        body = ", ".join(f"{m}: {A.tolist()}" for m, A in self._coeffs.items())
        return f"MatrixPolynomial({{{body}}}, origin={self._origin:g}, dim={self._dim})"

    def eval(self, t) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        x = (t_arr - self._origin)[..., None, None]
        out = np.zeros(t_arr.shape + (self._dim, self._dim))
        for m, A in self._coeffs.items():
            out = out + A * x**m
        return out

    __call__ = eval

    def reanchor(self, s: float) -> MatrixPolynomial:
        """Re-expand about ``s`` by the binomial theorem."""
        d = float(s) - self._origin
        acc: dict[int, np.ndarray] = {}
        for m, A in self._coeffs.items():
            for j in range(m + 1):
                c = math.comb(m, j) * d ** (m - j)
                acc[j] = acc.get(j, np.zeros((self._dim, self._dim))) + c * A
        return MatrixPolynomial(acc, s, self._dim)

    def is_strictly_upper_triangular(self) -> bool:
        return all(not np.any(np.tril(A)) for A in self._coeffs.values())


def rl_integral(f: FracPowerSeries, a: float) -> FracPowerSeries:
    """Riemann-Liouville integral of order ``a > 0`` anchored at ``f.origin``."""
    if not a > 0:
        raise DomainError(f"integration order must be positive, got {a}")
    return FracPowerSeries(
        [(g + a, c * specfun.gamma_ratio(g, g + a)) for g, c in f.terms], f.origin, f.shape
    )


def rl_derivative(f: FracPowerSeries, a: float) -> FracPowerSeries:
    """Riemann-Liouville derivative of order ``a > 0`` anchored at ``f.origin``.

    A term whose new exponent ``gamma - a`` falls on a pole of Gamma
    (0, -1, ...) is annihilated, since ``1/Gamma`` vanishes there.

    Raises
    ------
    DomainError
        If a surviving term would have a non-positive exponent.
    """
    if not a > 0:
        raise DomainError(f"differentiation order must be positive, got {a}")
    out = []
    for g, c in f.terms:
        g_new = g - a
        nearest = round(g_new)
        if nearest <= 0 and abs(g_new - nearest) <= POLE_TOL:
            continue
        if g_new <= 0:
            raise DomainError(
                f"D^{a:g} of (t - t0)^{g - 1:g} has exponent {g_new - 1:g}, not locally integrable"
            )
        out.append((g_new, c * specfun.gamma_ratio(g, g_new)))
    return FracPowerSeries(out, f.origin, f.shape)


def mul_poly(A: MatrixPolynomial, f: FracPowerSeries) -> FracPowerSeries:
    """Pointwise product ``A(t) f(t)``."""
    if A.dim != f.shape[0]:
        raise DimensionError(f"{A.dim}x{A.dim} polynomial times {f.shape} series")
    if not _same_origin(A.origin, f.origin):
        raise DimensionError(f"polynomial origin {A.origin} differs from series origin {f.origin}")
    return FracPowerSeries(
        [(g + m, Am @ c) for m, Am in A.coeffs.items() for g, c in f.terms],
        f.origin,
        f.shape,
    )


def power_convolve(kernel: FracPowerSeries, g: FracPowerSeries) -> FracPowerSeries:
    """``int_{t0}^t K(t - tau) g(tau) dtau`` for a kernel ``K`` in the lag ``t - tau``.

    ``kernel`` is read as ``sum_j K_j (t - tau)^(a_j - 1)`` regardless of its
    origin; ``g`` is anchored at ``t0 = g.origin``, which the result inherits.
    Each pair of terms contributes ``K_j G_k B(a_j, b_k) (t - t0)^(a_j + b_k - 1)``.
    """
    if kernel.shape[1] != g.shape[0]:
        raise DimensionError(f"kernel {kernel.shape} cannot act on {g.shape}")
    return FracPowerSeries(
        [(a + b, (K @ G) * specfun.beta(a, b)) for a, K in kernel.terms for b, G in g.terms],
        g.origin,
        (kernel.shape[0], g.shape[1]),
    )

"""Riemann-Liouville operators on uniform grids.

Sampled functions may carry a known power factor at the left endpoint:
``f(t) = g(t) (t - t0)^(sigma - 1)`` with ``g`` smooth.  Only ``g`` is stored,
so singular functions stay finite on the grid.  Integrals use product
integration: ``g`` is interpolated piecewise linearly and the weight
``(t_i - tau)^(a - 1) (tau - t0)^(sigma - 1)`` is integrated exactly against
each hat function, which gives second-order accuracy for smooth ``g``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from . import specfun
from .errors import DimensionError, DomainError

EXPONENT_TOL = 1e-9

# results whose power factor reaches this exponent are stored as plain values
FOLD_EXPONENT = 2.0


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``t_i = t0 + i h`` on ``[t0, T]`` with ``N`` intervals."""

    t0: float
    T: float
    N: int

    def __post_init__(self):
        if not self.T > self.t0:
            raise DomainError(f"grid needs T > t0, got [{self.t0}, {self.T}]")
        if int(self.N) != self.N or self.N < 4:
            raise DomainError(f"grid needs at least 4 intervals, got {self.N}")

    @property
    def h(self) -> float:
        return (self.T - self.t0) / self.N

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.N + 1)


@dataclass(frozen=True, eq=False)
class SampledMatrixFunction:
    """Matrix function sampled at every node of ``grid``.

    ``values`` has shape ``(N + 1, rows, cols)``.  With ``left_exponent``
    set to ``sigma`` the samples are the regular factor ``g`` of
    ``f(t) = g(t) (t - t0)^(sigma - 1)``; otherwise they are plain values.
    """

    grid: Grid
    values: np.ndarray
    left_exponent: float | None = None
    _shape: tuple = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3 or v.shape[0] != self.grid.N + 1:
            raise DimensionError(
                f"values must have shape (N+1, rows, cols) = ({self.grid.N + 1}, ., .), got {v.shape}"
            )
        if self.left_exponent is not None and not self.left_exponent > 0:
            raise DomainError(f"left exponent must be positive, got {self.left_exponent}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_shape", v.shape[1:])

    @classmethod
    def from_callable(
        cls, grid: Grid, fn: Callable, left_exponent: float | None = None
    ) -> SampledMatrixFunction:
        """Sample ``fn`` at the nodes; ``fn`` may be vectorized or scalar."""
        t = grid.nodes
        try:
            v = np.asarray(fn(t), dtype=float)
            if v.shape[:1] != t.shape:
                raise ValueError
        except (ValueError, TypeError):
            v = np.array([np.asarray(fn(ti), dtype=float) for ti in t])
        if v.ndim == 1:
            v = v[:, None, None]
        return cls(grid, v, left_exponent)

    @classmethod
    def zeros(cls, grid: Grid, shape) -> SampledMatrixFunction:
        return cls(grid, np.zeros((grid.N + 1,) + tuple(shape)))

    @property
    def shape(self) -> tuple[int, int]:
        return self._shape

    @property
    def dim(self) -> int:
        return self._shape[0]

    @property
    def sigma(self) -> float:
        """Exponent of the stored power factor (1 for plain values)."""
        return 1.0 if self.left_exponent is None else self.left_exponent

    def node_values(self) -> np.ndarray:
        """Actual function values at the nodes; NaN where singular at ``t0``."""
        s = self.sigma
        if s == 1.0:
            return self.values.copy()
        x = (self.grid.nodes - self.grid.t0)[:, None, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.values * x ** (s - 1)
        out[0] = 0.0 if s > 1 else np.nan
        return out

    def regular_factor(self, sigma: float) -> np.ndarray:
        """Samples re-expressed against the power factor of exponent ``sigma``.

        Only lowering the exponent is allowed, which keeps samples finite.
        """
        s = self.sigma
        if sigma > s + EXPONENT_TOL:
            raise DomainError(f"cannot raise the left exponent from {s} to {sigma}")
        if abs(sigma - s) <= EXPONENT_TOL:
            return self.values.copy()
        x = (self.grid.nodes - self.grid.t0)[:, None, None]
        return self.values * x ** (s - sigma)

    def with_exponent(self, sigma: float) -> SampledMatrixFunction:
        return SampledMatrixFunction(self.grid, self.regular_factor(sigma), sigma)

    def sup_norm(self) -> float:
        """Max-norm over the nodes after ``t0``, regular factor if singular."""
        if self.sigma < 1:
            return float(np.max(np.abs(self.values[1:]), initial=0.0))
        return float(np.max(np.abs(self.node_values()[1:]), initial=0.0))

    def interpolate(self, t) -> np.ndarray:
        """Linear interpolation of the regular factor, times the power factor."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < self.grid.t0) or np.any(t > self.grid.T):
            raise DomainError("interpolation point outside the grid")
        nodes = self.grid.nodes
        flat = self.values.reshape(self.grid.N + 1, -1)
        g = np.stack([np.interp(t, nodes, flat[:, k]) for k in range(flat.shape[1])], axis=-1)
        g = g.reshape(t.shape + self.shape)
        s = self.sigma
        if s == 1.0:
            return g
        x = (t - self.grid.t0)[:, None, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = g * x ** (s - 1)
        if s < 1:
            out[x[:, 0, 0] == 0] = np.nan
        return out

    def _check(self, other: SampledMatrixFunction):
        if other.grid != self.grid:
            raise DimensionError("sampled functions live on different grids")

    def __add__(self, other: SampledMatrixFunction) -> SampledMatrixFunction:
        if not isinstance(other, SampledMatrixFunction):
            return NotImplemented
        self._check(other)
        if self.shape != other.shape:
            raise DimensionError(f"shapes {self.shape} and {other.shape} differ")
        s = min(self.sigma, other.sigma)
        total = self.regular_factor(s) + other.regular_factor(s)
        return SampledMatrixFunction(self.grid, total, None if s == 1.0 else s)

    def __mul__(self, scalar: float) -> SampledMatrixFunction:
        return SampledMatrixFunction(self.grid, self.values * float(scalar), self.left_exponent)

    __rmul__ = __mul__

    def __neg__(self) -> SampledMatrixFunction:
        return self * -1.0

    def __sub__(self, other: SampledMatrixFunction) -> SampledMatrixFunction:
        return self + (-other)

    def __matmul__(self, M) -> SampledMatrixFunction:
        """Right product with a constant matrix or vector."""
        M = np.asarray(M, dtype=float)
        if M.ndim == 1:
            M = M.reshape(-1, 1)
        return SampledMatrixFunction(self.grid, self.values @ M, self.left_exponent)


def pointwise_product(F: SampledMatrixFunction, G: SampledMatrixFunction) -> SampledMatrixFunction:
    """Node-wise matrix product ``F(t) G(t)``; power factors multiply."""
    F._check(G)
    if F.shape[1] != G.shape[0]:
        raise DimensionError(f"cannot multiply {F.shape} by {G.shape} pointwise")
    s = F.sigma + G.sigma - 1
    if s <= 0:
        raise DomainError("pointwise product is not locally integrable")
    return SampledMatrixFunction(F.grid, F.values @ G.values, None if s == 1.0 else s)


def _delta_betainc(p: float, q: float, x: np.ndarray) -> np.ndarray:
    """Row-wise increments ``I_{x[:, j+1]}(p, q) - I_{x[:, j]}(p, q)``.

    Near 1 the complementary function is differenced instead, which avoids
    cancellation between values close to 1.
    """
    lower = special.betainc(p, q, x)
    upper = special.betainc(q, p, 1.0 - x)
    direct = lower[:, 1:] - lower[:, :-1]
    comp = upper[:, :-1] - upper[:, 1:]
    return np.where(x[:, :-1] >= 0.5, comp, direct)


def unit_weights(n: int, a: float, sigma: float) -> np.ndarray:
    """Product-integration weights, normalized to the result's power factor.

    Row ``i`` maps the regular-factor samples ``g_0..g_i`` of
    ``f = g (t - t0)^(sigma - 1)`` to the regular factor of ``J^a f`` at
    ``t_i`` with respect to ``(t - t0)^(sigma + a - 1)``.  The normalized
    weights do not depend on ``h`` and the leading block of size ``m + 1``
    is the weight matrix for ``m`` intervals.
    """
    return _unit_weights(int(n), round(float(a), 12), round(float(sigma), 12))


@functools.lru_cache(maxsize=64)
def _unit_weights(n: int, a: float, sigma: float) -> np.ndarray:
    W = np.zeros((n + 1, n + 1))
    W[0, 0] = specfun.gamma_ratio(sigma, sigma + a)
    i = np.arange(1, n + 1)[:, None].astype(float)
    j = np.arange(n)[None, :].astype(float)
    mask = j < i
    if abs(sigma - 1.0) <= 1e-14:
        p = np.where(mask, i - j - 1, 0.0)
        m0 = ((p + 1) ** a - p**a) / a
        m1 = ((p + 1) ** (a + 1) - p ** (a + 1)) / (a + 1)
        left = m1 - p * m0
        right = (p + 1) * m0 - m1
        scale = i**a
    else:
        x = np.minimum(np.arange(n + 1)[None, :] / i, 1.0)
        m0 = special.beta(sigma, a) * _delta_betainc(sigma, a, x)
        m1 = i * special.beta(sigma + 1, a) * _delta_betainc(sigma + 1, a, x)
        left = (j + 1) * m0 - m1
        right = m1 - j * m0
        scale = 1.0
    left = np.where(mask, left, 0.0) / scale
    right = np.where(mask, right, 0.0) / scale
    W[1:, :n] += left
    W[1:, 1:] += right
    W[1:] *= specfun.rgamma(a)
    W.setflags(write=False)
    return W


def grid_rl_integral(f: SampledMatrixFunction, a: float) -> SampledMatrixFunction:
    """Riemann-Liouville integral of order ``a > 0`` at every node.

    The result carries the power factor of exponent ``sigma + a``, so its
    value at ``t0`` is stored as the limit of the regular factor.  Once that
    exponent reaches ``FOLD_EXPONENT`` the function is at least C^1 and is
    stored as plain values instead, which keeps the number of distinct
    weight matrices small.
    """
    out = _integrate(f, a)
    if out.sigma >= FOLD_EXPONENT:
        return SampledMatrixFunction(f.grid, out.node_values())
    return out


def _integrate(f: SampledMatrixFunction, a: float) -> SampledMatrixFunction:
    if not a > 0:
        raise DomainError(f"integration order must be positive, got {a}")
    sigma = f.sigma
    W = unit_weights(f.grid.N, a, sigma)
    g = np.einsum("ij,jrc->irc", W, f.values)
    return SampledMatrixFunction(f.grid, g, sigma + a)


def _differentiate_regular(g: np.ndarray, sigma: float, h: float) -> tuple[np.ndarray, float]:
    """Derivative of ``x^(sigma - 1) g(x)`` as a regular factor and exponent.

    ``d/dx [x^(s-1) g] = x^(s-2) (x g' + (s - 1) g)``; ``g'`` comes from
    central differences (second-order one-sided at both ends).
    """
    m = g.shape[0]
    if m >= 3:
        dg = np.gradient(g, h, axis=0, edge_order=2)
    elif m == 2:
        dg = np.repeat((g[1:] - g[:1]) / h, 2, axis=0)
    else:
        dg = np.full_like(g, np.nan)
    if abs(sigma - 1.0) <= EXPONENT_TOL:
        return dg, 1.0
    if sigma < 1.0:
        raise DomainError(
            f"derivative of a function behaving like t^{sigma - 1:g} is not locally integrable"
        )
    x = h * np.arange(m).reshape((m,) + (1,) * (g.ndim - 1))
    x_dg = np.where(x == 0, 0.0, x * np.nan_to_num(dg))
    return x_dg + (sigma - 1.0) * g, sigma - 1.0


def grid_rl_derivative(f: SampledMatrixFunction, a: float) -> SampledMatrixFunction:
    """Riemann-Liouville derivative ``d/dt J^(1-a) f`` of order ``a`` in (0, 1).

    The derivative acts on the regular factor of ``J^(1-a) f``, and the
    result again carries an explicit power factor, so the left endpoint keeps
    a finite regular-factor sample even where the derivative is singular.
    """
    if not 0 < a < 1:
        raise DomainError(f"derivative order must lie in (0, 1), got {a}")
    G = _integrate(f, 1.0 - a)
    chi, s = _differentiate_regular(G.values, G.sigma, f.grid.h)
    return SampledMatrixFunction(f.grid, chi, None if s == 1.0 else s)


@dataclass(frozen=True, eq=False)
class SampledKernel:
    """Scalar two-variable function ``phi(t, s) = psi(t, s) (t - s)^(rho - 1)``.

    ``values[i, j]`` holds ``psi(t_i, s_j)`` for ``j <= i``; entries above the
    diagonal are ignored.
    """

    grid: Grid
    values: np.ndarray
    singular_exponent: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = self.grid.N + 1
        if v.shape != (n, n):
            raise DimensionError(f"kernel samples must have shape ({n}, {n}), got {v.shape}")
        if not self.singular_exponent > 0:
            raise DomainError("kernel singular exponent must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable, singular_exponent: float = 1.0):
        """Sample the regular factor ``psi(t, s)`` on the lower triangle."""
        t = grid.nodes
        T, S = np.meshgrid(t, t, indexing="ij")
        v = np.broadcast_to(np.asarray(fn(T, S), dtype=float), T.shape)
        return cls(grid, np.tril(v), singular_exponent)


@dataclass(frozen=True)
class DiffUnderIntegralReport:
    """Both sides of the fractional differentiation-under-the-integral rule."""

    residual: float
    h: float
    N: int
    lhs: np.ndarray
    rhs: np.ndarray
    limit_term: np.ndarray
    limit_term_one_step: np.ndarray


def check_diff_under_integral(phi: SampledKernel, a: float) -> DiffUnderIntegralReport:
    """Compare ``D^a int_{t0}^t phi(t, s) ds`` with
    ``int_{t0}^t D^a_s phi(t, s) ds + lim_{s -> t-} J^(1-a)_s phi(t, s)``.

    Partial operators act on ``t`` with lower limit ``s``.  Every integral is
    a product-integration sum that absorbs the ``(t - s)^(rho - 1)`` factor.
    The limit term uses the regular factor of ``J^(1-a) phi`` on the diagonal;
    the one-grid-step value at ``s = t - h`` is reported alongside.  The
    regularity conditions that justify the interchange are assumed, not checked.

    Returns the max absolute discrepancy over the interior nodes.
    """
    if not 0 < a < 1:
        raise DomainError(f"derivative order must lie in (0, 1), got {a}")
    grid = phi.grid
    N, h = grid.N, grid.h
    rho = float(phi.singular_exponent)
    psi = phi.values
    gamma_rho = specfun.gamma(rho)

    # LHS: F(t) = int phi(t, s) ds = (t - t0)^rho * regular factor
    U_rho = unit_weights(N, rho, 1.0)
    F_reg = gamma_rho * np.einsum("ij,ij->i", U_rho, np.tril(psi))
    F = SampledMatrixFunction(grid, F_reg[:, None, None], 1.0 + rho)
    lhs = grid_rl_derivative(F, a).node_values()[:, 0, 0]

    # columns of fixed s_j: c[k, j] = psi(t_{j+k}, s_j)
    k_idx = np.arange(N + 1)[:, None]
    j_idx = np.arange(N + 1)[None, :]
    valid = k_idx + j_idx <= N
    cols = np.where(valid, psi[np.minimum(k_idx + j_idx, N), j_idx], 0.0)
    U_g = unit_weights(N, 1.0 - a, rho)
    g = U_g @ cols  # regular factor of J^(1-a)_s phi, exponent rho + 1 - a
    s_g = rho + 1.0 - a

    chi = np.zeros_like(g)
    s_d = None
    for j in range(N + 1):
        m = N - j + 1
        chi[:m, j], s_d = _differentiate_regular(g[:m, j], s_g, h)

    # RHS integral: int (t_i - s)^(s_d - 1) chi(t_i, s) ds, chi(t_i, s_j) = chi[i - j, j]
    i_idx = np.arange(N + 1)[:, None]
    lag = i_idx - j_idx
    chi_ts = np.where(lag >= 0, chi[np.clip(lag, 0, N), j_idx], 0.0)
    U_d = unit_weights(N, s_d, 1.0)
    x = grid.nodes - grid.t0
    integral = specfun.gamma(s_d) * x**s_d * np.einsum("ij,ij->i", U_d, chi_ts)

    if abs(s_g - 1.0) <= EXPONENT_TOL:
        limit = g[0, :].copy()
    else:
        limit = np.zeros(N + 1)
    one_step = np.full(N + 1, np.nan)
    one_step[1:] = h ** (s_g - 1.0) * g[1, :N]

    rhs = integral + limit
    interior = slice(1, N)
    residual = float(np.max(np.abs(lhs[interior] - rhs[interior]), initial=0.0))
    return DiffUnderIntegralReport(residual, h, N, lhs, rhs, limit, one_step)

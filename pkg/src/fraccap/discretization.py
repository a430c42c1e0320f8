"""Quadratic-interpolation stencils for Riemann-Liouville operators on a uniform grid.

The RL integral of order ``beta`` at ``t_n`` is split into a local part (the
last panel ``[t_{n-1}, t_n]``) and a history part (panels ``0..n-2``). On
the local panel ``u`` is interpolated linearly (``n = 1``) or quadratically
through ``t_{n-2}, t_{n-1}, t_n``; history panel ``[t_j, t_{j+1}]`` uses the
quadratic through ``t_j, t_{j+1}, t_{j+2}``. Integrating the kernel
``t**(beta - 1) / Gamma(beta)`` against the Lagrange basis gives the ``d`` and
``b`` coefficient families. Setting ``beta = -alpha`` turns the integrals into
Hadamard finite parts, i.e. the RL derivative of order ``alpha``.

History coefficients are indexed by panel distance ``m = n - 1 - j``: panel
``j`` contributes ``b1[m] u_j + b2[m] u_{j+1} + b3[m] u_{j+2}``. Index
``m = 0`` is the local panel itself; it is finite only for integrals and is
stored as NaN for derivatives, where it is never used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from fraccap.errors import DomainError
from fraccap.specfun import gamma

# closed forms lose ~m**2 * eps to cancellation; beyond this use quadrature
_CLOSED_FORM_MAX_M = 2
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_n = n * dt`` for ``n = 0..steps``."""

    dt: float
    steps: int

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"time step must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"grid needs at least one step, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))

    @classmethod
    def over(cls, final_time: float, steps: int) -> "TimeGrid":
        return cls(final_time / steps, steps)

    @property
    def nodes(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1, dtype=float)

    @property
    def final_time(self) -> float:
        return self.dt * self.steps


def power_moments(order: float, count: int) -> np.ndarray:
    """``a_j = ((j + 1)**order - j**order) / order`` for ``j = 0..count-1``.

    For negative ``order`` the ``j = 0`` entry diverges and is returned as NaN.
    """
    j = np.arange(count, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = ((j + 1.0) ** order - j**order) / order
    if order < 0 and count:
        a[0] = np.nan
    return a


def _history_closed_form(order: float, m: np.ndarray):
    a0 = ((m + 1.0) ** order - m**order) / order
    a1 = ((m + 1.0) ** (order + 1) - m ** (order + 1)) / (order + 1)
    a2 = ((m + 1.0) ** (order + 2) - m ** (order + 2)) / (order + 2)
    c1 = 0.5 * (a2 - (2 * m - 1) * a1 + m * (m - 1) * a0)
    c2 = -(a2 - 2 * m * a1 + (m + 1) * (m - 1) * a0)
    c3 = 0.5 * (a2 - (2 * m + 1) * a1 + m * (m + 1) * a0)
    return c1, c2, c3


def _history_quadrature(order: float, m: np.ndarray):
    # z = m + x on the panel; Lagrange basis rewritten in x
    x = _GL_NODES[None, :]
    kern = (m[:, None] + x) ** (order - 1.0) * _GL_WEIGHTS[None, :]
    c1 = kern @ (0.5 * _GL_NODES * (_GL_NODES + 1.0))
    c2 = kern @ (1.0 - _GL_NODES**2)
    c3 = kern @ (-0.5 * _GL_NODES * (1.0 - _GL_NODES))
    return c1, c2, c3


def _history_moments(order: float, count: int):
    """Kernel moments against the three Lagrange polynomials, unscaled."""
    m = np.arange(count, dtype=float)
    out = [np.full(count, np.nan) for _ in range(3)]
    start = 0 if order > 0 else 1
    small = m[start : _CLOSED_FORM_MAX_M + 1]
    if small.size:
        for arr, val in zip(out, _history_closed_form(order, small)):
            arr[start : start + small.size] = val
    big = m[_CLOSED_FORM_MAX_M + 1 :]
    if big.size:
        for arr, val in zip(out, _history_quadrature(order, big)):
            arr[_CLOSED_FORM_MAX_M + 1 :] = val
    return out


@dataclass(frozen=True, eq=False)
class StencilCoefficients:
    """Local (``d1``, ``d2``) and history (``b1``, ``b2``, ``b3``) coefficients.

    ``order`` is the exponent used in the formulas: ``-alpha`` for the
    derivative of order ``alpha``, ``+alpha`` for the integral.
    """

    order: float
    dt: float
    steps: int
    d1: np.ndarray
    d2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    a: np.ndarray = field(repr=False)

    @property
    def alpha(self) -> float:
        """Derivative order (positive) when this is a derivative stencil."""
        return -self.order

    def __add__(self, other: "StencilCoefficients") -> "StencilCoefficients":
        if self.dt != other.dt or self.steps != other.steps:
            raise DomainError("cannot add stencils built on different grids")
        return StencilCoefficients(
            order=np.nan,
            dt=self.dt,
            steps=self.steps,
            d1=self.d1 + other.d1,
            d2=self.d2 + other.d2,
            b1=self.b1 + other.b1,
            b2=self.b2 + other.b2,
            b3=self.b3 + other.b3,
            a=np.full_like(self.a, np.nan),
        )


def _freeze(*arrays):
    for arr in arrays:
        arr.setflags(write=False)


@lru_cache(maxsize=64)
def stencil(order: float, dt: float, steps: int) -> StencilCoefficients:
    """Coefficients for the RL operator of signed ``order`` (cached)."""
    if order == 0 or not -1 < order < 1:
        raise DomainError(f"stencil order must lie in (-1, 0) or (0, 1), got {order}")
    beta = float(order)
    scale = dt**beta
    g2 = gamma(2.0 + beta)
    g3 = gamma(3.0 + beta)
    d1 = np.array([beta * scale / g2, scale / g2])
    d2 = np.array(
        [
            -beta * scale / (2.0 * g3),
            beta * (3.0 + beta) * scale / g3,
            (4.0 + beta) * scale / (2.0 * g3),
        ]
    )
    c1, c2, c3 = _history_moments(beta, steps)
    pref = scale / gamma(beta)
    b1, b2, b3 = pref * c1, pref * c2, pref * c3
    a = power_moments(beta, steps)
    _freeze(d1, d2, b1, b2, b3, a)
    return StencilCoefficients(beta, float(dt), int(steps), d1, d2, b1, b2, b3, a)


def build_coefficients(alpha: float, grid: TimeGrid) -> StencilCoefficients:
    """Derivative stencil of order ``alpha`` in (0, 1) on ``grid``."""
    if not 0 < alpha < 1:
        raise DomainError(f"derivative order must lie in (0, 1), got {alpha}")
    return stencil(-float(alpha), grid.dt, grid.steps)


def build_integral_coefficients(alpha: float, grid: TimeGrid) -> StencilCoefficients:
    """Integral stencil of order ``alpha`` in (0, 1) on ``grid``."""
    if not 0 < alpha < 1:
        raise DomainError(f"integral order must lie in (0, 1), got {alpha}")
    return stencil(float(alpha), grid.dt, grid.steps)


def local_part(u_window, coeffs: StencilCoefficients, p: int):
    """``sum_j d^{(p)}_j u_{n+j-p}`` for the window ``u_{n-p}..u_n``."""
    u_window = np.asarray(u_window)
    if p not in (1, 2):
        raise DomainError(f"local interpolation order must be 1 or 2, got {p}")
    if u_window.shape != (p + 1,):
        raise DomainError(f"local window needs {p + 1} values, got {u_window.shape}")
    d = coeffs.d1 if p == 1 else coeffs.d2
    return d @ u_window


def history_part(u_values, coeffs: StencilCoefficients, n: int):
    """History sum over panels ``0..n-2`` at node ``n``; zero for ``n = 1``.

    ``u_values`` must hold ``u_0..u_n`` (the last panel reaches ``u_n``).
    """
    if n < 1:
        raise DomainError("history is defined for n >= 1")
    if n == 1:
        return 0.0
    u = np.asarray(u_values)
    if u.shape[0] < n + 1:
        raise DomainError(f"history at n={n} needs {n + 1} values, got {u.shape[0]}")
    if n > coeffs.steps:
        raise DomainError(f"stencil built for {coeffs.steps} steps, asked for n={n}")
    m = slice(n - 1, 0, -1)  # panel j = 0..n-2 has distance m = n-1-j
    return (
        coeffs.b1[m] @ u[0 : n - 1]
        + coeffs.b2[m] @ u[1:n]
        + coeffs.b3[m] @ u[2 : n + 1]
    )


def apply_rl_derivative(u_values, coeffs: StencilCoefficients, n: int):
    """Discrete operator at node ``n``: linear local part at ``n = 1``, quadratic after."""
    u = np.asarray(u_values)
    if n < 1 or u.shape[0] < n + 1:
        raise DomainError(f"need u_0..u_{n} with n >= 1")
    if n == 1:
        return local_part(u[0:2], coeffs, 1)
    return local_part(u[n - 2 : n + 1], coeffs, 2) + history_part(u, coeffs, n)


def apply_all(u_values, coeffs: StencilCoefficients) -> np.ndarray:
    """Discrete operator at every node ``n = 1..len(u)-1`` (vectorized).

    The history sums are evaluated as three discrete convolutions, so this is
    the fast path used to build correction right-hand sides.
    """
    u = np.asarray(u_values)
    last = u.shape[0] - 1
    if last < 1:
        raise DomainError("need at least u_0 and u_1")
    if last > coeffs.steps:
        raise DomainError(f"stencil built for {coeffs.steps} steps, got {last}")
    out = np.empty(last, dtype=np.result_type(u, float))
    out[0] = coeffs.d1 @ u[0:2]
    if last == 1:
        return out
    pad = np.zeros(last + 2)
    c1, c2, c3 = pad.copy(), pad.copy(), pad.copy()
    c1[1:last] = coeffs.b1[1:last]
    c2[1:last] = coeffs.b2[1:last]
    c3[1:last] = coeffs.b3[1:last]
    conv1 = np.convolve(c1[: last + 1], u)
    conv2 = np.convolve(c2[: last + 1], u)
    conv3 = np.convolve(c3[: last + 1], u)
    n = np.arange(2, last + 1)
    hist = conv1[n - 1] + conv2[n] + conv3[n + 1] - c3[n] * u[1]
    # drop wrap-around terms whose distance index reaches n (no such panel)
    hist -= c2[n] * u[0] + c3[n + 1] * u[0]
    loc = coeffs.d2[0] * u[n - 2] + coeffs.d2[1] * u[n - 1] + coeffs.d2[2] * u[n]
    out[1:] = loc + hist
    return out


def row_weights(coeffs: StencilCoefficients, n: int) -> np.ndarray:
    """Coefficients multiplying ``u_0..u_n`` in the discrete operator at node ``n``."""
    if n < 1 or n > coeffs.steps:
        raise DomainError(f"row index {n} outside 1..{coeffs.steps}")
    w = np.zeros(n + 1)
    if n == 1:
        w[:] = coeffs.d1
        return w
    m = slice(n - 1, 0, -1)
    w[0 : n - 1] += coeffs.b1[m]
    w[1:n] += coeffs.b2[m]
    w[2 : n + 1] += coeffs.b3[m]
    w[n - 2 :] += coeffs.d2
    return w

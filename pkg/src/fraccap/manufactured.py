"""Fabricated solutions with closed-form forcings, random exponents and error metrics."""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from fraccap.errors import ConvergenceError, DomainError
from fraccap.specfun import HypergeomParams, gamma, reg_hypergeom, reg_hypergeom_large

POWER_SUM = "power_sum"
SINGULAR_OSCILLATORY = "singular_oscillatory"


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact solution family used to drive experiments.

    ``power_sum``: ``u(t) = sum_j c_j t**sigma_j`` (``c_j = 1`` by default).
    ``singular_oscillatory``: ``u(t) = t**sigma cos(omega t)``.
    The forcing is the sum over ``orders`` of the RL derivatives of ``u``.
    """

    kind: str
    exponents: tuple
    orders: tuple = (0.5,)
    frequency: float | None = None
    coefficients: tuple | None = None

    def __post_init__(self):
        exps = tuple(float(s) for s in np.atleast_1d(self.exponents))
        orders = tuple(float(a) for a in np.atleast_1d(self.orders))
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "orders", orders)
        if self.kind not in (POWER_SUM, SINGULAR_OSCILLATORY):
            raise DomainError(f"unknown solution kind {self.kind!r}")
        if not exps or any(s <= 0 for s in exps):
            raise DomainError("exponents must be positive and non-empty")
        if any(not 0 < a < 1 for a in orders) or not orders:
            raise DomainError("orders must lie in (0, 1)")
        if self.kind == SINGULAR_OSCILLATORY:
            if len(exps) != 1:
                raise DomainError("the oscillatory family has exactly one exponent")
            if self.frequency is None:
                raise DomainError("the oscillatory family needs a frequency")
        if self.coefficients is None:
            object.__setattr__(self, "coefficients", (1.0,) * len(exps))
        else:
            coeffs = tuple(float(c) for c in self.coefficients)
            if len(coeffs) != len(exps):
                raise DomainError("one coefficient per exponent is required")
            object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def power_sum(cls, exponents, orders=(0.5,), coefficients=None):
        return cls(POWER_SUM, tuple(np.atleast_1d(exponents)), tuple(np.atleast_1d(orders)),
                   coefficients=coefficients)

    @classmethod
    def oscillatory(cls, exponent: float, frequency: float, orders=(0.5,)):
        return cls(SINGULAR_OSCILLATORY, (exponent,), tuple(np.atleast_1d(orders)), frequency)


def eval_exact(sol: ManufacturedSolution, t):
    """Exact solution at ``t >= 0`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("exact solution is defined for t >= 0")
    if sol.kind == POWER_SUM:
        return sum(c * t**s for c, s in zip(sol.coefficients, sol.exponents))
    s = sol.exponents[0]
    return t**s * np.cos(sol.frequency * t)


# above this |argument| the direct series would need more than 500 terms
_SERIES_ARGUMENT_LIMIT = 2.0e4


@lru_cache(maxsize=65536)
def _oscillatory_forcing_scalar(t: float, sigma: float, alpha: float, omega: float) -> float:
    a = ((1.0 + sigma) / 2.0, (2.0 + sigma) / 2.0)
    b = (0.5, (1.0 + sigma - alpha) / 2.0, (2.0 + sigma - alpha) / 2.0)
    params = HypergeomParams(a, b, -((omega * t) ** 2) / 4.0)
    if abs(params.argument) <= _SERIES_ARGUMENT_LIMIT:
        try:
            series = reg_hypergeom(params)
        except ConvergenceError:
            series = reg_hypergeom_large(params)
    else:
        series = reg_hypergeom_large(params)
    scale = math.pi * 2.0 ** (alpha - sigma) * float(gamma(1.0 + sigma))
    return scale * t ** (sigma - alpha) * series


def eval_forcing(sol: ManufacturedSolution, t):
    """Forcing ``sum_l D^{alpha_l} u(t)`` for ``t > 0`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise DomainError("forcing is evaluated at t > 0 only")
    if sol.kind == POWER_SUM:
        total = np.zeros_like(t_arr)
        for a in sol.orders:
            for c, s in zip(sol.coefficients, sol.exponents):
                total = total + c * gamma(1.0 + s) / gamma(1.0 + s - a) * t_arr ** (s - a)
        return total
    s, w = sol.exponents[0], float(sol.frequency)
    flat = t_arr.ravel()
    out = np.array(
        [sum(_oscillatory_forcing_scalar(float(x), s, a, w) for a in sol.orders) for x in flat]
    )
    return out.reshape(t_arr.shape) if t_arr.ndim else float(out[0])


def sample_random_singularities(count: int, upper: float, seed: int) -> list[float]:
    """``count`` draws from U(0, upper) with a PCG64 generator seeded by ``seed``.

    Draws that are zero or closer than 1e-6 to an earlier draw are replaced.
    """
    if count < 1 or not upper > 0:
        raise DomainError("need count >= 1 and upper > 0")
    rng = np.random.Generator(np.random.PCG64(seed))
    out: list[float] = []
    ordered: list[float] = []
    while len(out) < count:
        x = float(rng.uniform(0.0, upper))
        if x <= 0.0 or x >= upper:
            continue
        i = bisect.bisect_left(ordered, x)
        near = ordered[max(i - 1, 0) : i + 1]
        if any(abs(x - y) < 1e-6 for y in near):
            continue
        ordered.insert(i, x)
        out.append(x)
    return out


def match_components(captured: Sequence[float], truth: Sequence[float]):
    """Pair captured and true exponents minimizing the worst relative error.

    Returns ``(pairs, complete)`` where ``pairs`` lists ``(i_captured, j_truth)``
    and ``complete`` is False when the two lengths differ (then only the
    best-matching subset is paired).
    """
    captured = list(map(float, captured))
    truth = list(map(float, truth))
    if not captured or not truth:
        raise DomainError("need non-empty exponent lists")
    k = min(len(captured), len(truth))
    best, best_pairs = math.inf, []
    for cap_idx in itertools.permutations(range(len(captured)), k):
        for tru_idx in itertools.combinations(range(len(truth)), k):
            worst = max(
                abs(truth[j] - captured[i]) / abs(truth[j]) for i, j in zip(cap_idx, tru_idx)
            )
            if worst < best:
                best, best_pairs = worst, list(zip(cap_idx, tru_idx))
    return sorted(best_pairs, key=lambda p: p[1]), len(captured) == len(truth)


def component_errors(captured: Sequence[float], truth: Sequence[float]) -> list[float]:
    """Relative errors ``|s*_j - s_j| / |s*_j|`` after optimal matching, ordered by truth."""
    pairs, _ = match_components(captured, truth)
    return [abs(truth[j] - captured[i]) / abs(truth[j]) for i, j in pairs]

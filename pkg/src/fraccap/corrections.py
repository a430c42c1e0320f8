"""Lubich-type starting weights that make the discrete operator exact on ``t**sigma_k``.

For every node ``n`` the weights ``W[:, n]`` solve the small Vandermonde
system ``sum_j j**sigma_k W_{j,n} = rhs_k(n)``, where ``rhs_k(n)`` is the gap
between the exact RL derivative of ``t**sigma_k`` and its discrete value,
both divided by ``dt**sigma_k``. The matrix does not depend on ``n``, so it is
factored once and reused for every right-hand side.

Exponents may be complex: the same solve then runs in complex arithmetic,
which is what the complex-step gradient of the capture stage relies on.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from fraccap.discretization import (
    StencilCoefficients,
    TimeGrid,
    apply_all,
    build_coefficients,
)
from fraccap.errors import ConditioningError, DomainError, SingularSystemError
from fraccap.specfun import gamma

MIN_SEPARATION = 1e-8
WARN_CONDITION = 1e13
REFUSE_CONDITION = 1e15
MAX_TERMS = 9


class IllConditionedWarning(RuntimeWarning):
    """The correction Vandermonde matrix is close to the double-precision limit."""


@dataclass(frozen=True)
class SigmaVector:
    """Correction exponents; positive and pairwise distinct."""

    values: tuple

    def __init__(self, values: Iterable[float]):
        vals = tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))
        object.__setattr__(self, "values", vals)
        validate_sigma(np.asarray(vals))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def validate_sigma(sigma: np.ndarray, max_terms: int = MAX_TERMS) -> None:
    """Check positivity, length and pairwise separation (on the real parts)."""
    re = np.real(np.atleast_1d(sigma))
    if re.size < 1:
        raise DomainError("need at least one correction exponent")
    if re.size > max_terms:
        raise DomainError(f"at most {max_terms} correction terms are supported, got {re.size}")
    if not np.all(np.isfinite(sigma)):
        raise DomainError("correction exponents must be finite")
    if np.any(re <= 0):
        raise DomainError(f"correction exponents must be positive, got {re}")
    gaps = np.abs(re[:, None] - re[None, :])
    np.fill_diagonal(gaps, np.inf)
    if np.any(gaps < MIN_SEPARATION):
        raise SingularSystemError(
            f"correction exponents must differ by at least {MIN_SEPARATION:g}: {re}"
        )


def vandermonde(sigma) -> np.ndarray:
    """``V[k, j] = (j + 1)**sigma_k``."""
    sigma = np.atleast_1d(np.asarray(sigma))
    j = np.arange(1, sigma.size + 1, dtype=float)
    return j[None, :] ** sigma[:, None]


def condition_number(matrix: np.ndarray) -> float:
    """Infinity-norm condition number through the explicit inverse."""
    inv = np.linalg.inv(matrix)
    return float(np.linalg.norm(matrix, np.inf) * np.linalg.norm(inv, np.inf))


@dataclass(frozen=True, eq=False)
class CorrectionSet:
    """Starting weights ``weights[j-1, n-1] = W_{j,n}`` for ``n = 1..steps``."""

    weights: np.ndarray
    sigma: np.ndarray
    alpha: float
    dt: float
    condition_estimate: float
    residual_norm: float

    @property
    def terms(self) -> int:
        return self.weights.shape[0]

    @property
    def steps(self) -> int:
        return self.weights.shape[1]

    @property
    def ill_conditioned(self) -> bool:
        return self.condition_estimate > WARN_CONDITION

    def weight(self, j: int, n: int):
        """``W_{j,n}`` with the 1-based indices used throughout the docs."""
        return self.weights[j - 1, n - 1]


def exact_power_derivative(sigma, alpha: float):
    """Gamma(1 + sigma) / Gamma(1 + sigma - alpha): RL derivative of t**sigma at t = 1."""
    sigma = np.asarray(sigma)
    return gamma(1.0 + sigma) / gamma(1.0 + sigma - alpha)


def correction_rhs(sigma, alpha: float, coeffs: StencilCoefficients, steps: int) -> np.ndarray:
    """Scaled defect ``rhs[k, n-1]`` of the discrete operator on ``t**sigma_k``."""
    sigma = np.atleast_1d(np.asarray(sigma))
    n = np.arange(1, steps + 1, dtype=float)
    j = np.arange(steps + 1, dtype=float)
    rhs = np.empty((sigma.size, steps), dtype=np.result_type(sigma, float))
    exact = exact_power_derivative(sigma, alpha)
    for k, s in enumerate(sigma):
        samples = np.zeros(steps + 1, dtype=rhs.dtype)
        samples[1:] = j[1:] ** s
        # discrete operator on (t/dt)**s equals dt**-s times the one on t**s
        rhs[k] = exact[k] * coeffs.dt ** (-alpha) * n ** (s - alpha) - apply_all(samples, coeffs)
    return rhs


def solve_correction_weights(
    sigma,
    alpha: float,
    grid: TimeGrid,
    coeffs: StencilCoefficients | None = None,
) -> CorrectionSet:
    """Starting weights for exponents ``sigma`` at every node of ``grid``.

    Raises SingularSystemError for (nearly) repeated exponents and
    ConditioningError when the Vandermonde condition number exceeds 1e15;
    above 1e13 an IllConditionedWarning is emitted and the set is flagged.
    """
    sigma = np.atleast_1d(np.asarray(sigma))
    if sigma.dtype.kind not in "fc":
        sigma = sigma.astype(float)
    validate_sigma(sigma)
    if coeffs is None:
        coeffs = build_coefficients(alpha, grid)
    if coeffs.dt != grid.dt or coeffs.steps < grid.steps:
        raise DomainError("stencil does not match the grid")
    if not np.isclose(coeffs.alpha, alpha, rtol=0, atol=1e-15):
        raise DomainError(f"stencil order {coeffs.alpha} does not match alpha={alpha}")

    V = vandermonde(sigma)
    cond = condition_number(V)
    if cond > REFUSE_CONDITION:
        raise ConditioningError(
            f"correction matrix condition number {cond:.3g} exceeds {REFUSE_CONDITION:g}"
        )
    if cond > WARN_CONDITION:
        warnings.warn(
            f"correction matrix condition number {cond:.3g} is above {WARN_CONDITION:g}",
            IllConditionedWarning,
            stacklevel=2,
        )
    rhs = correction_rhs(sigma, alpha, coeffs, grid.steps)
    try:
        lu = scipy.linalg.lu_factor(V, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularSystemError(str(exc)) from exc
    weights = scipy.linalg.lu_solve(lu, rhs)
    residual = float(np.max(np.abs(V @ weights - rhs))) if weights.size else 0.0
    weights.setflags(write=False)
    return CorrectionSet(
        weights=weights,
        sigma=sigma.copy(),
        alpha=float(alpha),
        dt=grid.dt,
        condition_estimate=cond,
        residual_norm=residual,
    )


def closed_form_w11(sigma: float, alpha: float, dt: float) -> float:
    """``W_{1,1}`` for a single correction term, without any linear solve."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    d11 = dt ** (-alpha) / gamma(2.0 - alpha)
    return exact_power_derivative(sigma, alpha) * dt ** (-alpha) - d11


def aggregate_multiterm(
    weight_sets: Sequence[CorrectionSet],
    coeff_sets: Sequence[StencilCoefficients],
) -> tuple[CorrectionSet, StencilCoefficients]:
    """Element-wise sums of weights and stencils over the fractional orders."""
    if not weight_sets or len(weight_sets) != len(coeff_sets):
        raise DomainError("need one correction set per stencil")
    if len(weight_sets) == 1:
        return weight_sets[0], coeff_sets[0]
    first = weight_sets[0]
    for ws in weight_sets[1:]:
        if ws.weights.shape != first.weights.shape or ws.dt != first.dt:
            raise DomainError("correction sets differ in shape or time step")
        if not np.array_equal(ws.sigma, first.sigma):
            raise DomainError("correction sets use different exponents")
    weights = sum(ws.weights for ws in weight_sets)
    weights.setflags(write=False)
    coeffs = coeff_sets[0]
    for c in coeff_sets[1:]:
        coeffs = coeffs + c
    total = CorrectionSet(
        weights=weights,
        sigma=first.sigma,
        alpha=float("nan"),
        dt=first.dt,
        condition_estimate=max(ws.condition_estimate for ws in weight_sets),
        residual_norm=max(ws.residual_norm for ws in weight_sets),
    )
    return total, coeffs


SIGMA_RULES = ("alpha_k", "tenth_k", "custom")


def sigma_rule_values(rule: str, alpha: float, m: int, custom: Sequence[float] | None = None):
    """Exponents ``sigma_1..sigma_m`` under a named rule."""
    k = np.arange(1, m + 1, dtype=float)
    if rule == "alpha_k":
        return alpha * k
    if rule == "tenth_k":
        return 0.1 * k
    if rule == "custom":
        if custom is None or len(custom) < m:
            raise DomainError(f"custom rule needs at least {m} exponents")
        return np.asarray(custom[:m], dtype=float)
    raise DomainError(f"unknown sigma rule {rule!r}; expected one of {SIGMA_RULES}")


def condition_study(
    sigma_rule: str,
    alpha: float,
    max_m: int,
    custom: Sequence[float] | None = None,
) -> list[tuple[int, float]]:
    """Condition number of the ``M x M`` correction matrix for ``M = 1..max_m``."""
    if not 1 <= max_m <= 12:
        raise DomainError("max_m must lie in 1..12")
    rows = []
    for m in range(1, max_m + 1):
        V = vandermonde(sigma_rule_values(sigma_rule, alpha, m, custom))
        rows.append((m, condition_number(V)))
    return rows

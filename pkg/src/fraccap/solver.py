"""Implicit finite-difference integration of single- and multi-term FDEs.

Solves ``sum_l D^{alpha_l} u = f`` (Caputo sense, ``u(0) = u0``) by
rewriting each term in Riemann-Liouville form. The first ``B`` steps are
coupled through the correction weights and are solved together as a small
dense system; every later step is a scalar implicit update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from fraccap.corrections import (
    CorrectionSet,
    aggregate_multiterm,
    solve_correction_weights,
)
from fraccap.discretization import (
    StencilCoefficients,
    TimeGrid,
    build_coefficients,
    row_weights,
)
from fraccap.errors import DomainError, SingularSystemError
from fraccap.specfun import gamma

Forcing = Union[Callable[[np.ndarray], np.ndarray], Sequence[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class FdeProblem:
    """Fractional orders, initial value and forcing.

    ``forcing`` is either a callable evaluated at the nodes ``t_1..t_N`` or
    the samples ``f_1..f_N`` themselves.
    """

    orders: tuple
    initial_value: float = 0.0
    forcing: Forcing = field(default=None, repr=False)

    def __post_init__(self):
        orders = tuple(float(a) for a in np.atleast_1d(self.orders))
        if not orders:
            raise DomainError("need at least one fractional order")
        for a in orders:
            if not 0 < a < 1:
                raise DomainError(f"fractional orders must lie in (0, 1), got {a}")
        object.__setattr__(self, "orders", orders)
        if self.forcing is None:
            raise DomainError("a forcing (callable or samples) is required")

    def sample_forcing(self, grid: TimeGrid) -> np.ndarray:
        """Forcing at ``t_1..t_N``."""
        if callable(self.forcing):
            values = np.asarray(self.forcing(grid.nodes[1:]), dtype=float)
        else:
            values = np.asarray(self.forcing, dtype=float)
            if values.shape[0] < grid.steps:
                raise DomainError(
                    f"forcing has {values.shape[0]} samples, grid needs {grid.steps}"
                )
            values = values[: grid.steps]
        if values.shape != (grid.steps,) or not np.all(np.isfinite(values)):
            raise DomainError("forcing must be finite at every node t_1..t_N")
        return values

    def rhs(self, grid: TimeGrid) -> np.ndarray:
        """Right-hand side of the RL form: forcing plus the initial-value shift.

        For Caputo data ``D_C u = D_RL u - u0 t**-alpha / Gamma(1 - alpha)``,
        so the RL equation carries ``+u0 t**-alpha / Gamma(1 - alpha)`` per term.
        """
        f = self.sample_forcing(grid)
        if self.initial_value != 0.0:
            t = grid.nodes[1:]
            for a in self.orders:
                f = f + self.initial_value * t ** (-a) / gamma(1.0 - a)
        return f


@dataclass(frozen=True, eq=False)
class SolutionSeries:
    """Numerical solution ``u_0..u_N`` on ``grid``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.steps + 1,):
            raise DomainError("solution length must be steps + 1")

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes


def block_size(steps: int, terms: int) -> int:
    """Number of leading steps solved as one coupled system."""
    return min(steps, max(3, terms))


def operator_for(problem: FdeProblem, grid: TimeGrid, sigma=None):
    """Aggregated stencil and correction set (``None`` without corrections)."""
    coeff_sets = [build_coefficients(a, grid) for a in problem.orders]
    if sigma is None or np.size(sigma) == 0:
        coeffs = coeff_sets[0]
        for c in coeff_sets[1:]:
            coeffs = coeffs + c
        return coeffs, None
    weight_sets = [solve_correction_weights(sigma, a, grid, c) for a, c in zip(problem.orders, coeff_sets)]
    corrections, coeffs = aggregate_multiterm(weight_sets, coeff_sets)
    return coeffs, corrections


def assemble_block_system(
    rhs: np.ndarray,
    u0: float,
    corrections: CorrectionSet | None,
    coeffs: StencilCoefficients,
    size: int,
):
    """Coupled system ``A u_{1..size} = r`` for the first ``size`` steps.

    ``rhs`` holds the RL right-hand side at ``t_1..t_N``. Row ``n`` is the
    discrete operator at ``t_n`` with known ``u_0`` moved to the right and the
    correction terms ``W_{j,n} (u_j - u0)`` added. Without corrections the
    matrix is lower triangular.
    """
    terms = 0 if corrections is None else corrections.terms
    if size < 1 or size > coeffs.steps:
        raise DomainError(f"block size {size} outside 1..{coeffs.steps}")
    if terms > size:
        raise DomainError(f"block size {size} cannot hold {terms} correction terms")
    dtype = np.result_type(rhs, float) if corrections is None else np.result_type(
        rhs, corrections.weights
    )
    A = np.zeros((size, size), dtype=dtype)
    r = np.array(rhs[:size], dtype=dtype)
    for n in range(1, size + 1):
        w = row_weights(coeffs, n)
        A[n - 1, :n] = w[1:]
        r[n - 1] -= w[0] * u0
        if terms:
            wn = corrections.weights[:, n - 1]
            A[n - 1, :terms] += wn
            r[n - 1] += wn.sum() * u0
    return A, r


def march(
    rhs: np.ndarray,
    u0: float,
    corrections: CorrectionSet | None,
    coeffs: StencilCoefficients,
    grid: TimeGrid,
    start: np.ndarray,
) -> np.ndarray:
    """Continue a solution whose first ``len(start)`` steps are known."""
    dtype = np.result_type(rhs, start)
    u = np.zeros(grid.steps + 1, dtype=dtype)
    u[0] = u0
    first = len(start)
    u[1 : first + 1] = start
    if first >= grid.steps:
        return u
    if first < 2:
        # the quadratic stencil needs u_{n-2}; finish step 2 via its own row
        w = row_weights(coeffs, 2)
        corr = 0.0
        if corrections is not None:
            corr = corrections.weights[:, 1] @ (u[1 : corrections.terms + 1] - u0)
        u[2] = (rhs[1] - w[0] * u[0] - w[1] * u[1] - corr) / w[2]
        first = 2
    d2, b1, b2, b3 = coeffs.d2, coeffs.b1, coeffs.b2, coeffs.b3
    diag = d2[2] + b3[1]
    if diag == 0 or not np.isfinite(diag):
        raise SingularSystemError("implicit marching update has a zero diagonal")
    terms = 0 if corrections is None else corrections.terms
    W = None if corrections is None else corrections.weights
    for n in range(first + 1, grid.steps + 1):
        known = (
            d2[0] * u[n - 2]
            + d2[1] * u[n - 1]
            + b1[n - 1 : 0 : -1] @ u[0 : n - 1]
            + b2[n - 1 : 0 : -1] @ u[1:n]
            + b3[n - 1 : 1 : -1] @ u[2:n]
        )
        if terms:
            known = known + W[:, n - 1] @ (u[1 : terms + 1] - u0)
        u[n] = (rhs[n - 1] - known) / diag
    return u


def integrate(problem: FdeProblem, sigma, grid: TimeGrid) -> SolutionSeries:
    """Solve ``problem`` on ``grid`` with correction exponents ``sigma`` (or None).

    ``sigma`` may be complex; the whole computation then runs in complex
    arithmetic.
    """
    coeffs, corrections = operator_for(problem, grid, sigma)
    rhs = problem.rhs(grid)
    return integrate_with(rhs, problem.initial_value, corrections, coeffs, grid)


def integrate_with(rhs, u0, corrections, coeffs, grid) -> SolutionSeries:
    """Integration with a prepared operator (used by the capture loop)."""
    terms = 0 if corrections is None else corrections.terms
    size = block_size(grid.steps, terms)
    if terms > size:
        raise DomainError(f"{terms} correction terms need at least {terms} steps")
    A, r = assemble_block_system(rhs, u0, corrections, coeffs, size)
    try:
        start = np.linalg.solve(A, r)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"start-up block is singular: {exc}") from exc
    u = march(rhs, u0, corrections, coeffs, grid, start)
    if not np.all(np.isfinite(u)):
        raise SingularSystemError("integration produced non-finite values")
    return SolutionSeries(grid, u)


def l2_relative_error(numeric, exact) -> float:
    """Discrete ``||u - u_exact||_2 / ||u_exact||_2`` over the nodes."""
    u = numeric.values if isinstance(numeric, SolutionSeries) else np.asarray(numeric)
    ex = np.asarray(exact)
    if u.shape != ex.shape:
        raise DomainError(f"length mismatch: {u.shape} vs {ex.shape}")
    denom = np.linalg.norm(ex)
    if denom == 0:
        raise DomainError("exact solution is identically zero")
    return float(np.linalg.norm(u - ex) / denom)

"""Recover singularity exponents from short-time data.

The misfit ``E(sigma)`` is the squared distance between observed values and
the corrected numerical solution driven by the observed forcing. It is
minimized by gradient descent with Barzilai-Borwein steps and complex-step
gradients; ``capture_auto`` adds correction terms one at a time until the
misfit drops below tolerance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fraccap.corrections import aggregate_multiterm, solve_correction_weights
from fraccap.discretization import TimeGrid, build_coefficients
from fraccap.errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    FraccapError,
    SingularSystemError,
)
from fraccap.solver import FdeProblem, integrate_with
from fraccap.specfun import digamma, gamma

SIGMA_MIN = 1e-4
SIGMA_MAX = 5.0

CONVERGED_ERROR = "converged_error"
CONVERGED_GRADIENT = "converged_gradient"
MAX_ITERATIONS = "max_iterations"
# iterates frozen at floating-point resolution while both tolerances are unmet
STALLED = "stalled"


@dataclass(frozen=True, eq=False)
class ObservedData:
    """Observed ``u`` and forcing at ``t_1..t_N`` of ``grid`` plus ``u(0)``."""

    u_data: np.ndarray
    f_data: np.ndarray
    u0: float
    grid: TimeGrid

    def __post_init__(self):
        u = np.asarray(self.u_data, dtype=float).copy()
        f = np.asarray(self.f_data, dtype=float).copy()
        if u.shape != (self.grid.steps,) or f.shape != (self.grid.steps,):
            raise DomainError(f"need {self.grid.steps} values of u and f")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(f))):
            raise DomainError("observed data must be finite")
        u.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "u_data", u)
        object.__setattr__(self, "f_data", f)
        object.__setattr__(self, "u0", float(self.u0))

    @classmethod
    def from_functions(cls, exact, forcing, grid: TimeGrid, u0: float = 0.0) -> "ObservedData":
        t = grid.nodes[1:]
        return cls(np.asarray(exact(t), dtype=float), np.asarray(forcing(t), dtype=float), u0, grid)

    def head(self, count: int) -> "ObservedData":
        """The first ``count`` observations."""
        grid = TimeGrid(self.grid.dt, count)
        return ObservedData(self.u_data[:count], self.f_data[:count], self.u0, grid)


@dataclass(frozen=True)
class CaptureConfig:
    tol_error: float = 1e-15
    tol_gradient: float = 1e-14
    cs_perturbation: float = 1e-14
    initial_step: float = 1e-3
    max_iterations: int = 5000
    max_terms: int = 3
    sigma_min: float = SIGMA_MIN
    sigma_max: float = SIGMA_MAX
    # initial guess for the new component when escalating to two terms
    m2_guess: str = "zero"
    # consecutive iterations without a resolvable change in sigma before stopping
    stall_window: int = 10

    def __post_init__(self):
        for name in ("tol_error", "tol_gradient", "cs_perturbation", "initial_step"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.max_iterations < 1 or self.stall_window < 1:
            raise ConfigError("max_iterations and stall_window must be at least 1")
        if not 1 <= self.max_terms <= 3:
            raise ConfigError("max_terms must lie in 1..3")
        if not 0 < self.sigma_min < self.sigma_max:
            raise ConfigError("need 0 < sigma_min < sigma_max")
        if self.m2_guess not in ("zero", "one"):
            raise ConfigError("m2_guess must be 'zero' or 'one'")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    sigma: tuple
    error: float
    grad_norm: float
    step: float


@dataclass
class CaptureTrace:
    records: list = field(default_factory=list)
    status: str = ""

    @property
    def terms(self) -> int:
        return len(self.records[0].sigma) if self.records else 0

    @property
    def best(self) -> IterationRecord:
        return min(self.records, key=lambda r: r.error)

    @property
    def last(self) -> IterationRecord:
        return self.records[-1]

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate([r.error for r in self.records])

    def write_csv(self, path) -> None:
        m = self.terms
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k"] + [f"sigma_{j + 1}" for j in range(m)] + ["E", "grad_norm", "step"])
            for r in self.records:
                w.writerow(
                    [r.k] + [f"{s:.17g}" for s in r.sigma]
                    + [f"{r.error:.17g}", f"{r.grad_norm:.17g}", f"{r.step:.17g}"]
                )


@dataclass
class CaptureResult:
    sigma: tuple
    m_used: int
    final_error: float
    traces: list

    @property
    def status(self) -> str:
        return self.traces[-1].status if self.traces else ""


class Misfit:
    """``E(sigma)`` for fixed data and fractional orders.

    Stencils and the right-hand side are built once; each call only solves
    for the correction weights and integrates over the data window.
    """

    def __init__(self, data: ObservedData, orders: Sequence[float] = (0.5,)):
        self.data = data
        self.orders = tuple(float(a) for a in np.atleast_1d(orders))
        problem = FdeProblem(self.orders, data.u0, data.f_data)
        self.rhs = problem.rhs(data.grid)
        self.coeff_sets = [build_coefficients(a, data.grid) for a in self.orders]

    def solution(self, sigma) -> np.ndarray:
        sigma = np.atleast_1d(np.asarray(sigma))
        if sigma.size > self.data.grid.steps:
            raise DomainError(
                f"{sigma.size} correction terms need at least as many observations"
            )
        weight_sets = [
            solve_correction_weights(sigma, a, self.data.grid, c)
            for a, c in zip(self.orders, self.coeff_sets)
        ]
        corrections, coeffs = aggregate_multiterm(weight_sets, self.coeff_sets)
        return integrate_with(self.rhs, self.data.u0, corrections, coeffs, self.data.grid).values

    def __call__(self, sigma):
        u = self.solution(sigma)
        # no conjugate: the result must stay analytic in sigma for the complex step
        r = self.data.u_data - u[1:]
        e = np.sum(r * r)
        return e if np.iscomplexobj(e) else float(e)

    def gradient(self, sigma, h: float = 1e-14) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        if not h > 0:
            raise DomainError("complex-step perturbation must be positive")
        g = np.empty(sigma.size)
        for j in range(sigma.size):
            z = sigma.astype(complex)
            z[j] += 1j * h
            g[j] = np.imag(self(z)) / h
        return g


def misfit(sigma, data: ObservedData, orders: Sequence[float] = (0.5,)):
    """Squared misfit between data and the corrected solution (complex-capable)."""
    return Misfit(data, orders)(sigma)


def misfit_gradient(
    sigma, data: ObservedData, config: CaptureConfig | None = None, orders=(0.5,)
) -> np.ndarray:
    """Complex-step gradient ``Im E(sigma + i h e_j) / h``."""
    config = config or CaptureConfig()
    return Misfit(data, orders).gradient(sigma, config.cs_perturbation)


def _bb_step(s: np.ndarray, y: np.ndarray, fallback: float) -> float:
    den = float(y @ y)
    if den < 1e-30:
        return fallback
    step = float(s @ y) / den
    if not math.isfinite(step) or step <= 0:
        return fallback
    return step


def _distinct(sigma: np.ndarray) -> bool:
    return sigma.size < 2 or np.min(np.diff(np.sort(sigma))) >= 1e-8


def capture_fixed_m(
    data: ObservedData,
    sigma0,
    config: CaptureConfig | None = None,
    orders: Sequence[float] = (0.5,),
    evaluator: Misfit | None = None,
) -> CaptureTrace:
    """Gradient descent with Barzilai-Borwein steps for a fixed number of terms.

    Iterates are clamped to ``[sigma_min, sigma_max]``. The run stops as
    ``stalled`` when sigma has not moved beyond rounding for ``stall_window``
    iterations (the gradient then sits on its rounding floor). A step that leads to
    an invalid exponent vector (coinciding components, singular system) is
    halved until the update is admissible.
    """
    config = config or CaptureConfig()
    E = evaluator or Misfit(data, orders)
    sigma = np.clip(np.atleast_1d(np.asarray(sigma0, dtype=float)), config.sigma_min, config.sigma_max)
    if sigma.size > data.grid.steps:
        raise DomainError("need at least as many observations as correction terms")
    if not _distinct(sigma):
        raise DomainError(f"initial exponents must be distinct, got {sigma}")

    def evaluate(s):
        e = E(s)
        g = E.gradient(s, config.cs_perturbation)
        if not (math.isfinite(e) and np.all(np.isfinite(g))):
            raise ConvergenceError(f"non-finite misfit or gradient at sigma={s}")
        return e, g

    e, g = evaluate(sigma)
    trace = CaptureTrace()
    step = config.initial_step
    prev_sigma = prev_g = None
    frozen = 0
    k = 0
    while True:
        if prev_sigma is not None:
            step = _bb_step(sigma - prev_sigma, g - prev_g, config.initial_step)
        gnorm = float(np.linalg.norm(g))
        trace.records.append(IterationRecord(k, tuple(sigma.tolist()), e, gnorm, step))
        if e < config.tol_error:
            trace.status = CONVERGED_ERROR
            break
        if gnorm < config.tol_gradient:
            trace.status = CONVERGED_GRADIENT
            break
        if len(trace.records) >= config.max_iterations:
            trace.status = MAX_ITERATIONS
            break
        if frozen >= config.stall_window:
            trace.status = STALLED
            break
        trial_step = step
        for _ in range(60):
            new_sigma = np.clip(sigma - trial_step * g, config.sigma_min, config.sigma_max)
            if _distinct(new_sigma):
                try:
                    new_e, new_g = evaluate(new_sigma)
                    break
                except (FraccapError, FloatingPointError):
                    pass
            trial_step *= 0.5
        else:
            raise ConvergenceError(f"no admissible descent step from sigma={sigma}")
        moved = np.max(np.abs(new_sigma - sigma)) > 8 * np.finfo(float).eps * np.max(np.abs(sigma))
        frozen = 0 if moved else frozen + 1
        prev_sigma, prev_g = sigma, g
        sigma, e, g = new_sigma, new_e, new_g
        k += 1
    return trace


def _m2_guess(sigma1: float, config: CaptureConfig) -> np.ndarray:
    first = config.sigma_min if config.m2_guess == "zero" else 1.0
    if abs(first - sigma1) < 1e-6:
        first += 1e-3
    return np.array([first, sigma1])


def capture_auto(
    data: ObservedData,
    config: CaptureConfig | None = None,
    orders: Sequence[float] = (0.5,),
    sigma0: float | None = None,
) -> CaptureResult:
    """Add correction terms one at a time until the misfit is below ``tol_error``.

    Returns the first run that meets the tolerance, otherwise the best
    iterate over all runs. Escalation stops early when the starting guess
    for the next number of terms gives a singular or ill-conditioned system.
    """
    config = config or CaptureConfig()
    E = Misfit(data, orders)
    max_m = min(config.max_terms, data.grid.steps)
    guess = np.array([config.sigma_min if sigma0 is None else sigma0])
    traces = []
    best = None
    for m in range(1, max_m + 1):
        if m == 2:
            guess = _m2_guess(traces[-1].best.sigma[0], config)
        elif m == 3:
            s1, s2 = traces[-1].best.sigma
            guess = np.array([s1, s2, 0.5 * (s1 + s2)])
        try:
            trace = capture_fixed_m(data, guess, config, orders, evaluator=E)
        except SingularSystemError:
            # the escalated guess is not even evaluable; keep the best so far
            if best is None:
                raise
            break
        traces.append(trace)
        rec = trace.best
        if best is None or rec.error < best.error:
            best = rec
        if rec.error < config.tol_error:
            return CaptureResult(rec.sigma, m, rec.error, traces)
    return CaptureResult(best.sigma, len(best.sigma), best.error, traces)


# ---- single-step, single-term Newton mode ----


def single_step_solution(sigma: float, f1: float, dt: float, alpha: float) -> float:
    """``u_1`` of the corrected scheme with one term and ``u0 = 0``."""
    return dt**alpha * float(gamma(1.0 + sigma - alpha) / gamma(1.0 + sigma)) * f1


def single_step_derivative(sigma: float, u1: float, f1: float, dt: float, alpha: float) -> float:
    """Analytic ``dE/dsigma`` of ``E = (u1 - u_1(sigma))**2``."""
    model = single_step_solution(sigma, f1, dt, alpha)
    psi = float(digamma(1.0 + sigma - alpha) - digamma(1.0 + sigma))
    return -2.0 * psi * model * (u1 - model)


def newton_single(
    u1: float,
    f1: float,
    dt: float,
    alpha: float,
    sigma0: float,
    tol: float = 1e-30,
    max_iterations: int = 100,
):
    """Newton iteration on ``E(sigma)`` using the closed-form one-step solution.

    Returns ``(sigma, trace)`` with trace rows ``(k, sigma, E)``.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    sigma = float(sigma0)
    trace = []
    for k in range(max_iterations + 1):
        if sigma + 1.0 - alpha <= 0:
            raise ConvergenceError(f"Newton iterate left the domain: sigma={sigma}")
        r = u1 - single_step_solution(sigma, f1, dt, alpha)
        e = r * r
        trace.append((k, sigma, e))
        if e < tol or k == max_iterations:
            break
        de = single_step_derivative(sigma, u1, f1, dt, alpha)
        if abs(de) < 1e-300:
            raise ConvergenceError(f"zero derivative in Newton iteration at sigma={sigma}")
        sigma -= e / de
    return sigma, trace


def single_step_data(sigma_star: Sequence[float], dt: float, alpha: float):
    """``(u_1, f_1)`` for ``u = sum_j t**sigma_j`` at ``t = dt``."""
    s = np.atleast_1d(np.asarray(sigma_star, dtype=float))
    u1 = float(np.sum(dt**s))
    f1 = float(np.sum(gamma(1.0 + s) / gamma(1.0 + s - alpha) * dt ** (s - alpha)))
    return u1, f1


def sigma_vs_dt_study(
    sigma_star: Sequence[float],
    alpha: float,
    dt_values: Sequence[float],
    sigma0: float = 0.5,
) -> list[tuple[float, float]]:
    """Converged single-step exponent for each time step."""
    rows = []
    for dt in dt_values:
        u1, f1 = single_step_data(sigma_star, dt, alpha)
        sigma, _ = newton_single(u1, f1, dt, alpha, sigma0)
        rows.append((float(dt), sigma))
    return rows

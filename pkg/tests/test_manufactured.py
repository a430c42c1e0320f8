import math

import mpmath
import numpy as np
import pytest

from fraccap.errors import DomainError
from fraccap.manufactured import (
    ManufacturedSolution,
    component_errors,
    eval_exact,
    eval_forcing,
    match_components,
    sample_random_singularities,
)

SIGMA, OMEGA = 0.2426481954401539, 10 * math.pi


def termwise_forcing(t, sigma, alpha, omega, terms=120):
    """RL derivative of the cosine Taylor series, term by term, in 50 digits."""
    with mpmath.workdps(50):
        t = mpmath.mpf(t)
        total = mpmath.mpf(0)
        for k in range(terms):
            p = sigma + 2 * k
            c = (-1) ** k * mpmath.mpf(omega) ** (2 * k) / mpmath.factorial(2 * k)
            total += c * mpmath.gamma(1 + p) / mpmath.gamma(1 + p - alpha) * t ** (p - alpha)
        return float(total)


def quadrature_forcing(t, sigma, alpha, omega):
    """d/dt of the order 1 - alpha RL integral, by quadrature and numerical differentiation."""
    with mpmath.workdps(30):
        def integral(s):
            f = lambda x: (1 - x) ** (-alpha) * x**sigma * mpmath.cos(omega * s * x)
            return s ** (1 - alpha + sigma) * mpmath.quad(f, [0, 1]) / mpmath.gamma(1 - alpha)

        return float(mpmath.diff(integral, mpmath.mpf(t)))


def test_power_sum_examples():
    sol = ManufacturedSolution.power_sum((0.1, 0.3))
    assert eval_exact(sol, 0.0) == 0.0
    assert eval_exact(sol, 1.0) == pytest.approx(2.0)
    f = eval_forcing(sol, 1.0)
    ref = math.gamma(1.1) / math.gamma(0.6) + math.gamma(1.3) / math.gamma(0.8)
    assert f == pytest.approx(ref, rel=1e-14)


def test_power_sum_with_coefficients_and_multiple_orders():
    sol = ManufacturedSolution.power_sum((0.5, 2.0), (0.3, 0.7), (3.0, -1.0))
    t = np.array([0.2, 1.5])
    np.testing.assert_allclose(eval_exact(sol, t), 3 * t**0.5 - t**2)
    ref = sum(
        c * math.gamma(1 + s) / math.gamma(1 + s - a) * t ** (s - a)
        for a in (0.3, 0.7)
        for c, s in ((3.0, 0.5), (-1.0, 2.0))
    )
    np.testing.assert_allclose(eval_forcing(sol, t), ref, rtol=1e-13)


@pytest.mark.parametrize("t", [0.001, 0.01, 0.1, 0.5, 1.0])
def test_oscillatory_forcing_matches_termwise_series(t):
    sol = ManufacturedSolution.oscillatory(SIGMA, OMEGA)
    ref = termwise_forcing(t, SIGMA, 0.5, OMEGA)
    assert eval_forcing(sol, t) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_oscillatory_forcing_matches_quadrature_at_early_time():
    sol = ManufacturedSolution.oscillatory(SIGMA, OMEGA)
    ref = quadrature_forcing(0.01, SIGMA, 0.5, OMEGA)
    assert eval_forcing(sol, 0.01) == pytest.approx(ref, rel=1e-8)


def test_oscillatory_forcing_reduces_to_power_law_near_zero():
    # cos(omega t) = 1 - (omega t)**2 / 2 + ..., so the gap to the t**sigma forcing
    # is the second-order term up to a relative O((omega t)**2)
    osc = ManufacturedSolution.oscillatory(SIGMA, OMEGA)
    power = ManufacturedSolution.power_sum((SIGMA,))
    t = 1e-3
    gap = eval_forcing(osc, t) - eval_forcing(power, t)
    p = SIGMA + 2
    second = -(OMEGA**2) / 2 * math.gamma(1 + p) / math.gamma(1 + p - 0.5) * t ** (p - 0.5)
    assert gap == pytest.approx(second, rel=(OMEGA * t) ** 2)
    assert eval_exact(osc, t) == pytest.approx(t**SIGMA * math.cos(OMEGA * t))


def test_oscillatory_forcing_vectorized_and_multi_order():
    sol = ManufacturedSolution.oscillatory(SIGMA, OMEGA, (0.3, 0.7))
    t = np.array([0.05, 0.4])
    got = eval_forcing(sol, t)
    assert got.shape == (2,)
    for x, g in zip(t, got):
        ref = termwise_forcing(x, SIGMA, 0.3, OMEGA) + termwise_forcing(x, SIGMA, 0.7, OMEGA)
        assert g == pytest.approx(ref, rel=1e-10)


def test_oscillatory_forcing_at_long_times_is_finite():
    sol = ManufacturedSolution.oscillatory(SIGMA, OMEGA)
    vals = eval_forcing(sol, np.array([5.0, 12.0, 20.0]))
    assert np.all(np.isfinite(vals))


def test_solution_validation():
    with pytest.raises(DomainError):
        ManufacturedSolution("nope", (0.1,))
    with pytest.raises(DomainError):
        ManufacturedSolution.power_sum((-0.1,))
    with pytest.raises(DomainError):
        ManufacturedSolution.power_sum((0.1,), (1.2,))
    with pytest.raises(DomainError):
        ManufacturedSolution.power_sum((0.1, 0.2), coefficients=(1.0,))
    with pytest.raises(DomainError):
        ManufacturedSolution("singular_oscillatory", (0.1, 0.2), frequency=1.0)
    with pytest.raises(DomainError):
        ManufacturedSolution("singular_oscillatory", (0.1,))
    sol = ManufacturedSolution.power_sum((0.1,))
    with pytest.raises(DomainError):
        eval_forcing(sol, 0.0)
    with pytest.raises(DomainError):
        eval_exact(sol, -1.0)


def test_sampling_is_deterministic_and_in_range():
    a = sample_random_singularities(50, 0.5, seed=7)
    assert a == sample_random_singularities(50, 0.5, seed=7)
    assert a != sample_random_singularities(50, 0.5, seed=8)
    assert all(0 < x < 0.5 for x in a)
    gaps = np.diff(np.sort(a))
    assert gaps.min() >= 1e-6


def test_sampling_mean():
    draws = sample_random_singularities(10_000, 0.5, seed=0)
    assert np.mean(draws) == pytest.approx(0.25, abs=0.01)


def test_sampling_validation():
    with pytest.raises(DomainError):
        sample_random_singularities(0, 0.5, 1)
    with pytest.raises(DomainError):
        sample_random_singularities(3, 0.0, 1)


def test_component_errors_examples():
    errs = component_errors((0.30003, 0.1000086), (0.1, 0.3))
    assert errs == pytest.approx([8.6e-5, 1.0e-4], rel=1e-3)
    errs = component_errors((0.0987, 0.4979, 0.2932), (0.1, 0.3, 0.5))
    assert errs == pytest.approx([0.013, 0.0227, 0.0042], abs=1e-3)


def test_match_components_orders_and_flags():
    pairs, complete = match_components((0.5, 0.1), (0.1, 0.5))
    assert pairs == [(1, 0), (0, 1)] and complete
    pairs, complete = match_components((0.152,), (0.1, 0.3))
    assert len(pairs) == 1 and not complete
    with pytest.raises(DomainError):
        match_components((), (0.1,))

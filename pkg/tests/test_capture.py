import csv
import math

import numpy as np
import pytest
from conftest import power_data
from hypothesis import given
from hypothesis import strategies as st

from fraccap.capture import (
    CONVERGED_ERROR,
    CONVERGED_GRADIENT,
    MAX_ITERATIONS,
    STALLED,
    CaptureConfig,
    Misfit,
    ObservedData,
    capture_auto,
    capture_fixed_m,
    misfit,
    misfit_gradient,
    newton_single,
    sigma_vs_dt_study,
    single_step_data,
    single_step_derivative,
    single_step_solution,
)
from fraccap.discretization import TimeGrid
from fraccap.errors import ConfigError, ConvergenceError, DomainError
from fraccap.specfun import digamma

STATUSES = {CONVERGED_ERROR, CONVERGED_GRADIENT, MAX_ITERATIONS, STALLED}


def test_misfit_vanishes_at_the_true_exponent():
    data = power_data((0.1,), 100, 0.01)
    assert misfit([0.1], data) <= 1e-28


def test_misfit_landscape_has_intermediate_minimum():
    # with two singularities and one correction term the minimum sits between them
    E = Misfit(power_data((0.1, 0.3), 100, 0.01))
    grid = np.linspace(0.05, 0.45, 81)
    vals = [E([s]) for s in grid]
    best = grid[int(np.argmin(vals))]
    assert abs(best - 0.153) <= 0.01


def test_two_term_landscape_is_symmetric():
    E = Misfit(power_data((0.1, 0.3), 100, 0.01))
    assert E([0.1, 0.3]) <= 1e-24 and E([0.3, 0.1]) <= 1e-24
    assert E([0.2, 0.4]) == pytest.approx(E([0.4, 0.2]), rel=1e-10)
    assert E([0.2, 0.4]) > 1e-12


def test_gradient_matches_finite_difference():
    data = power_data((0.1, 0.3), 100, 0.01)
    E = Misfit(data)
    s0 = np.array([0.15, 0.4])
    g = E.gradient(s0)
    h = 1e-6
    fd = np.array(
        [(E(s0 + h * e) - E(s0 - h * e)) / (2 * h) for e in np.eye(2)]
    )
    np.testing.assert_allclose(g, fd, rtol=1e-5)
    np.testing.assert_allclose(misfit_gradient(s0, data), g, rtol=1e-14)


def test_gradient_vanishes_at_the_exact_minimum():
    E = Misfit(power_data((0.1, 0.3), 100, 0.01))
    assert np.linalg.norm(E.gradient([0.1, 0.3])) <= 1e-10


def test_single_step_gradient_matches_digamma_formula():
    # one observation and one term: the scheme reduces to the closed form
    alpha, dt, s_star = 0.5, 0.01, 0.3
    data = power_data((s_star,), 1, dt)
    E = Misfit(data)
    u1, f1 = data.u_data[0], data.f_data[0]
    for s in (0.1, 0.2, 0.6):
        assert E.solution([s])[1] == pytest.approx(single_step_solution(s, f1, dt, alpha), rel=1e-12)
        model = single_step_solution(s, f1, dt, alpha)
        psi = float(digamma(1 + s - alpha) - digamma(1 + s))
        analytic = -2 * psi * model * (u1 - model)
        assert E.gradient([s])[0] == pytest.approx(analytic, rel=1e-8)
        assert single_step_derivative(s, u1, f1, dt, alpha) == pytest.approx(analytic, rel=1e-14)


@pytest.mark.parametrize("h", [1e-12, 1e-14, 1e-16])
def test_complex_step_is_insensitive_to_the_perturbation(h):
    E = Misfit(power_data((0.1, 0.3), 50, 0.02))
    ref = E.gradient([0.2], 1e-20)
    assert E.gradient([0.2], h) == pytest.approx(ref, rel=1e-6)


@given(
    st.lists(st.floats(0.02, 1.5), min_size=3, max_size=3).filter(
        lambda v: min(abs(a - b) for i, a in enumerate(v) for b in v[i + 1 :]) > 0.05
    ),
    st.permutations([0, 1, 2]),
)
def test_misfit_is_permutation_invariant(sigma, perm):
    E = Misfit(power_data((0.1, 0.3, 0.5), 3, 1 / 3))
    base = E(sigma)
    swapped = E([sigma[i] for i in perm])
    assert abs(swapped - base) <= 1e-13
    assert abs(swapped - base) <= 1e-10 * base


def test_misfit_complex_input_stays_analytic():
    E = Misfit(power_data((0.2,), 10, 0.1))
    z = E(np.array([0.25 + 1e-20j]))
    assert isinstance(z, complex) or np.iscomplexobj(z)
    assert z.real == pytest.approx(E([0.25]), rel=1e-14)


def test_fixed_m_capture_single_singularity():
    data = power_data((0.1,), 100, 0.01)
    trace = capture_fixed_m(data, [1e-4])
    assert trace.status in (CONVERGED_ERROR, CONVERGED_GRADIENT, STALLED)
    assert abs(trace.best.sigma[0] - 0.1) / 0.1 <= 1e-6


def test_trace_invariants():
    data = power_data((0.1, 0.3), 100, 0.01)
    trace = capture_fixed_m(data, [1e-4])
    assert trace.status in STATUSES
    ks = [r.k for r in trace.records]
    assert ks == list(range(len(ks)))
    best = trace.best_so_far()
    assert np.all(np.diff(best) <= 0)
    assert best[-1] == trace.best.error
    assert all(r.step > 0 and r.grad_norm >= 0 for r in trace.records)
    assert all(1e-4 <= s <= 5.0 for r in trace.records for s in r.sigma)
    last = trace.last
    if trace.status == CONVERGED_ERROR:
        assert last.error < 1e-15
    elif trace.status == CONVERGED_GRADIENT:
        assert last.grad_norm < 1e-14


def test_max_iterations_status():
    data = power_data((0.1, 0.3), 100, 0.01)
    trace = capture_fixed_m(data, [0.4], CaptureConfig(max_iterations=3))
    assert trace.status == MAX_ITERATIONS and len(trace.records) == 3


def test_capture_auto_stops_at_one_term_for_a_single_power():
    data = power_data((0.5,), 20, 0.05)
    result = capture_auto(data)
    assert result.m_used == 1
    assert result.sigma[0] == pytest.approx(0.5, rel=1e-6)
    assert result.final_error < 1e-15 and result.status == CONVERGED_ERROR


def test_capture_auto_escalates_to_two_terms():
    data = power_data((0.1, 0.3), 3, 1 / 3)
    result = capture_auto(data, CaptureConfig(max_terms=2))
    assert result.m_used == 2
    assert [t.terms for t in result.traces] == [1, 2]
    assert sorted(result.sigma) == pytest.approx([0.1, 0.3], rel=1e-3)


def test_capture_validation():
    data = power_data((0.1,), 2, 0.1)
    with pytest.raises(DomainError):
        capture_fixed_m(data, [0.1, 0.2, 0.3])
    with pytest.raises(DomainError):
        capture_fixed_m(power_data((0.1,), 5, 0.1), [0.2, 0.2])
    for bad in (
        dict(tol_error=0.0),
        dict(cs_perturbation=-1.0),
        dict(max_iterations=0),
        dict(max_terms=4),
        dict(sigma_min=1.0, sigma_max=0.5),
        dict(m2_guess="two"),
    ):
        with pytest.raises(ConfigError):
            CaptureConfig(**bad)


def test_observed_data_validation_and_head():
    g = TimeGrid(0.1, 4)
    with pytest.raises(DomainError):
        ObservedData(np.ones(3), np.ones(4), 0.0, g)
    with pytest.raises(DomainError):
        ObservedData(np.array([1, 2, np.nan, 4.0]), np.ones(4), 0.0, g)
    d = ObservedData(np.arange(4.0), np.ones(4), 0.0, g)
    assert d.head(2).grid.steps == 2 and list(d.head(2).u_data) == [0.0, 1.0]
    with pytest.raises(ValueError):
        d.u_data[0] = 5.0


def test_trace_csv(tmp_path):
    trace = capture_fixed_m(power_data((0.2,), 10, 0.1), [0.4], CaptureConfig(max_iterations=4))
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["k", "sigma_1", "E", "grad_norm", "step"]
    assert len(rows) == 1 + len(trace.records)
    assert float(rows[1][1]) == trace.records[0].sigma[0]


@pytest.mark.parametrize("s_star, guesses", [(0.5, (1e-4, 1.05)), (0.1, (1e-4, 1.1))])
def test_newton_recovers_a_single_power(s_star, guesses):
    u1, f1 = single_step_data((s_star,), 0.01, 0.5)
    for g in guesses:
        sigma, trace = newton_single(u1, f1, 0.01, 0.5, g)
        assert abs(sigma - s_star) < 1e-10
        assert len(trace) <= 101
        assert trace[-1][2] <= trace[0][2]


def test_newton_intermediate_values():
    for s_star, target in (((0.1, 0.2), 0.1377), ((0.1, 0.3, 0.5), 0.1856)):
        u1, f1 = single_step_data(s_star, 0.01, 0.5)
        sigma, _ = newton_single(u1, f1, 0.01, 0.5, 0.5)
        assert abs(sigma - target) <= 0.01


def test_newton_errors():
    with pytest.raises(DomainError):
        newton_single(1.0, 1.0, 0.01, 1.5, 0.3)
    with pytest.raises(ConvergenceError):
        newton_single(1.0, 1.0, 0.01, 0.5, -0.6)


def test_sigma_vs_dt_trend():
    dts = [1e-1, 1e-2, 1e-3, 1e-4]
    rows = sigma_vs_dt_study((0.1, 0.2), 0.5, dts)
    sig = [s for _, s in rows]
    assert all(0.1 < s < 0.2 for s in sig)
    assert all(b < a for a, b in zip(sig, sig[1:]))


def test_single_step_data_example():
    u1, f1 = single_step_data((0.5,), 0.01, 0.5)
    assert u1 == pytest.approx(0.1)
    assert f1 == pytest.approx(math.gamma(1.5))

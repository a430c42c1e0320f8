import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fraccap.capture import ObservedData
from fraccap.discretization import TimeGrid
from fraccap.manufactured import ManufacturedSolution, eval_exact, eval_forcing

settings.register_profile(
    "fraccap", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("fraccap")

ACCEPTANCE_LINES: list[str] = []


def power_data(sigma_star, steps, dt, orders=(0.5,)) -> ObservedData:
    sol = ManufacturedSolution.power_sum(sigma_star, orders)
    return ObservedData.from_functions(
        lambda t: eval_exact(sol, t), lambda t: eval_forcing(sol, t), TimeGrid(dt, steps)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from landweber_kaczmarz import Problem
from landweber_kaczmarz.experiment import truth_profile


@pytest.fixture
def desk():
    """Small grid used by the operator checks."""
    return Problem.build(n_interior=9, n_steps=21)


@pytest.fixture
def desk_theta(desk):
    return truth_profile(desk.space.x)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)

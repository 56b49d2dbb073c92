import numpy as np
import pytest

from stopgame import StochasticGame

ACCEPTANCE_LINES = []


def one_state(reward=1.0, bequest=100.0, discount=0.5):
    return StochasticGame([[[1.0]]], [[reward]], [bequest], discount)


def two_state_chain(bequest=(0.4, 5.0), discount=0.5):
    """s0 -> s1 -> s1, one action, R = [0, 1]."""
    P = np.array([[[0.0, 1.0], [0.0, 1.0]]])
    R = np.array([[0.0], [1.0]])
    return StochasticGame(P, R, np.array(bequest, dtype=float), discount)


@pytest.fixture
def chain():
    return two_state_chain()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

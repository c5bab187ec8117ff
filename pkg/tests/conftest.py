import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ncpsatz.freealg import parse_poly
from ncpsatz.pencil import MonicPencil

settings.register_profile("ncpsatz", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ncpsatz")


@pytest.fixture
def ball():
    """``[[1, x], [x, 1]]``: the interval [-1, 1] at every level."""
    return MonicPencil((np.array([[0.0, -1.0], [-1.0, 0.0]]),))


@pytest.fixture
def halfline():
    """``1 - x``: all X with X <= 1."""
    return MonicPencil((np.array([[1.0]]),))


@pytest.fixture
def P():
    return lambda text, g=1: parse_poly(text, g)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)

import math
import warnings

import numpy as np
import pytest

from fraclab.experiments import cantor_net
from fraclab.metric_space import FiniteMetricSpace

warnings.filterwarnings("ignore", module="numba")

LOG2_LOG3 = math.log(2) / math.log(3)


def line(*coords, floor=None):
    return FiniteMetricSpace.from_points(np.asarray(coords, dtype=float)[:, None], resolution_floor=floor)


@pytest.fixture(scope="session")
def cantor8():
    return cantor_net(8)


@pytest.fixture(scope="session")
def cantor14():
    return cantor_net(14)


@pytest.fixture(scope="session")
def grid1000():
    return FiniteMetricSpace.from_points(np.linspace(0, 1, 1000)[:, None])


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for text in ACCEPTANCE_LINES:
            terminalreporter.write_line(text)

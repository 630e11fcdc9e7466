import numpy as np
import pytest

from smectic.params import default_params
from smectic.spectral import Grid


@pytest.fixture
def grid():
    return Grid(16)


@pytest.fixture
def small_grid():
    return Grid(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def params():
    return default_params()


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(tag, passed, detail)``."""

    def record(tag, passed, detail):
        line = f"{tag}: {'PASS' if passed else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

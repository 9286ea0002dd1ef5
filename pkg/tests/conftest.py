import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "snls", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("snls")

# acceptance lines collected by tests/test_acceptance.py and echoed in the summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def l2(grid, f):
    return math.sqrt(grid.cell_volume * float(np.sum(np.abs(f) ** 2)))

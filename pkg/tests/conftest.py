from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stitlab.geometry import make_box, make_simplex

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def cube():
    return make_box([1.0, 1.0, 1.0])


@pytest.fixture
def simplex():
    return make_simplex(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

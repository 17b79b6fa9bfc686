import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from poisson_source import PowerLaw, Region, SensorNetwork

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

REF_SENSORS = [(-1.0, -1.0), (2.0, -1.0), (2.0, 2.0), (-1.0, 2.0)]
THETA0 = (0.3, 0.4)


@pytest.fixture(scope="session")
def net():
    return SensorNetwork(REF_SENSORS, nu=1.0, T=6.0, lambda0=1.0, theta_region=Region(0.0, 1.0, 0.0, 1.0))


@pytest.fixture(scope="session")
def model():
    return PowerLaw(3.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stefan_control.model import DomainConfig, GridSpec

settings.register_profile("repo", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def domain10():
    return DomainConfig(sigma=10.0, horizon=0.1)


@pytest.fixture
def grid12(domain10):
    return GridSpec.from_domain(domain10, 12, 200)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])

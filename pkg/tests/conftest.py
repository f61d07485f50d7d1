import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sasindex import MassSystem, find_central_configuration, guess_configuration

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def make_cc(masses, shape, alpha=1.0, d=2):
    sys = MassSystem(masses, d, alpha)
    return sys, find_central_configuration(sys, guess_configuration(sys, shape))


@pytest.fixture(scope="session")
def equilateral():
    return make_cc((1, 1, 1), "equilateral")


@pytest.fixture(scope="session")
def euler_m1():
    return make_cc((1, 1, 1), "collinear")


@pytest.fixture(scope="session")
def euler_m20():
    return make_cc((1, 20, 1), "collinear")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

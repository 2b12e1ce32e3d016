import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fluxlab.core import Grid, ModelParams

settings.register_profile(
    "fluxlab", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "fluxlab"))


@pytest.fixture
def free_grid():
    return Grid.symmetric(20.0, 0.05)


@pytest.fixture
def trap_grid():
    return Grid.symmetric(30.0, 0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def params(k=0.1, omega=0.0, rho0=1.0):
    return ModelParams(rho0, k, omega)


# acceptance report: one line per criterion, printed after the run
ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record sub-checks of an acceptance criterion: ``check(ok, text)``."""
    key = request.node.get_closest_marker("criterion").args

    def check(ok, text):
        ACCEPTANCE.setdefault(key, []).append((bool(ok), text))
        return bool(ok)

    return check


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for (num, title), checks in sorted(ACCEPTANCE.items()):
        verdict = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        tr.write_line(f"criterion {num} [{verdict}] {title}")
        for ok, text in checks:
            tr.write_line(f"    {'ok  ' if ok else 'FAIL'} {text}")

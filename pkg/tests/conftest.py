import sys

import numpy as np
import pytest

from dendrite_opt.model import PhysicalParams, TaperProfile


@pytest.fixture
def params():
    """Desk constants with gamma = 1 > 0."""
    return PhysicalParams(R_a=1.0, C_m=1.0, G_m=1.0, G_s=0.5, A_s=2 * np.pi)


@pytest.fixture
def params_g0():
    """G_s = G_m, so gamma = 0."""
    return PhysicalParams(R_a=1.0, C_m=1.0, G_m=1.0, G_s=1.0, A_s=2 * np.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cylinder():
    return TaperProfile.constant(1.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])

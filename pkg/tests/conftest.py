import math

import numpy as np
import pytest

from nrho_hover.design import RevisitSpec, design_teardrop
from nrho_hover.orbit import monodromy, refine_nrho, nominal_nrho

MIN_ALPHA, MIN_BETA = math.pi / 2, 3 * math.pi / 2


@pytest.fixture(scope="session")
def orbit():
    return refine_nrho(nominal_nrho())


@pytest.fixture(scope="session")
def mono(orbit):
    return monodromy(orbit)


@pytest.fixture(scope="session")
def min_spec():
    return RevisitSpec(1.0, MIN_ALPHA, MIN_BETA)


@pytest.fixture(scope="session")
def min_solution(orbit, min_spec):
    return design_teardrop(min_spec, orbit)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    results = getattr(__import__("sys").modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])

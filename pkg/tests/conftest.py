import sys

import numpy as np
import pytest
from hypothesis import settings

from edakit.robotmodel import shipped_robot

# compiled kernels make the first example slow
settings.register_profile("edakit", deadline=None, max_examples=60)
settings.load_profile("edakit")


@pytest.fixture(scope="session")
def planar():
    return shipped_robot("planar2r")


@pytest.fixture(scope="session")
def iiwa():
    return shipped_robot("iiwa14")


@pytest.fixture(scope="session")
def single():
    return shipped_robot("single")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.LINES):
        terminalreporter.write_line(module.LINES[number])

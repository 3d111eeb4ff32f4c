import numpy as np
import pytest
from hypothesis import settings

from axialize import presets
from axialize.trap import mode_set

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE_LINES[number] = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES, key=str):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def ref_modes():
    return mode_set(presets.reference_trap())


@pytest.fixture(scope="session")
def detection():
    return presets.detection_beam()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

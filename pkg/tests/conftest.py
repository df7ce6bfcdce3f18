import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record():
    def _record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from wfsolve.core import Instance, Sequence
from wfsolve.oracle import read_reference, reference_suite

DATA = Path(__file__).parent / "data"

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EXAMPLE = Instance(n=5, T=10, w=(10, 10, 7, 6, 3), f=(1, 1, 1, 1, 1))
EXAMPLE_A = Sequence((2, 1, 5, 4, 3))
EXAMPLE_B = Sequence((2, 1, 3, 5, 2, 1, 4, 3))


@pytest.fixture
def example():
    return EXAMPLE


@pytest.fixture(scope="session")
def suite():
    return reference_suite()


@pytest.fixture(scope="session")
def reference_optima():
    return read_reference((DATA / "oracle_suite.txt").read_text())


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def fixed_length_optima(suite):
    """Brute-force optimum of every suite instance at every admissible length."""
    from wfsolve.oracle import brute_force_fixed_length

    return {
        name: {L: brute_force_fixed_length(inst, L).objective for L in inst.lengths()}
        for name, inst in suite
    }


# acceptance verdicts, filled by test_acceptance.py: number -> (passed, detail)
ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (passed, detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")

import time

import pytest
from hypothesis import HealthCheck, settings

from netopacity.bundled import generate_ring_config

settings.register_profile(
    "fixed",
    max_examples=1000,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fixed")


@pytest.fixture(scope="session")
def ring2():
    return generate_ring_config(2)


@pytest.fixture(scope="session")
def ring_subsystem(ring2):
    return ring2.subsystems[0]


# --- acceptance bookkeeping ---------------------------------------------------
# The acceptance module runs last so it can inspect how the property suites fared
# in the same session instead of running them a second time.

class SessionRecord:
    def __init__(self):
        self.start = time.perf_counter()
        self.property_tests = set()
        self.outcomes = {}
        self.collected_modules = set()
        self.lines = []


RECORD = SessionRecord()


def pytest_collection_modifyitems(session, config, items):
    items.sort(key=lambda it: it.nodeid.startswith("tests/test_acceptance.py"))
    for it in items:
        RECORD.collected_modules.add(it.nodeid.split("::")[0])
        if getattr(getattr(it, "obj", None), "is_hypothesis_test", False):
            RECORD.property_tests.add(it.nodeid)


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        RECORD.outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if RECORD.lines:
        terminalreporter.section("acceptance criteria")
        for line in RECORD.lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def session_record():
    return RECORD

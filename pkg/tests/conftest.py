import time

import pytest
from hypothesis import settings

from eg_gripper.calibration import calibrate, anchor_measurements
from eg_gripper.geometry import GripperGeometry, adjacency_map, build_layout

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")

SESSION_START = time.perf_counter()
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture(scope="session")
def geometry():
    return GripperGeometry()


@pytest.fixture(scope="session")
def layout(geometry):
    return build_layout(geometry)


@pytest.fixture(scope="session")
def adjacency(layout):
    return adjacency_map(layout)


@pytest.fixture(scope="session")
def calibrated():
    return calibrate(anchor_measurements())


def pytest_collection_modifyitems(items):
    # the whole-suite runtime check has to see every other test finish first
    last = [i for i in items if i.get_closest_marker("runs_last")]
    rest = [i for i in items if not i.get_closest_marker("runs_last")]
    items[:] = rest + last


def pytest_configure(config):
    config.addinivalue_line("markers", "runs_last: order this test after all others")
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, text = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        ACCEPTANCE_RESULTS[n] = ("PASS" if rep.passed else "FAIL", text)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        status, text = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {text}")

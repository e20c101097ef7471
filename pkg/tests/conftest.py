import numpy as np
import pytest

import tglab as t

CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    cr = getattr(report, "criterion", None)
    if cr is not None:
        CRITERIA[cr] = report.outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep.criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), outcome in sorted(CRITERIA.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {status}  {title}")


@pytest.fixture(scope="session")
def desk_setup():
    """convdiff_1d(16, 1, 4) with auto-scaled Jacobi and aggregation to 4 points."""
    p = t.convdiff_1d(16, 1.0, 4.0)
    s = t.auto_scale(p, "scaled-jacobi")
    return t.make_setup(p, s, t.aggregation_restriction(16, 4))


@pytest.fixture(scope="session")
def desk_2d_setup():
    p = t.convdiff_2d(8, 8, 0.1, (1.0, 2.0))
    s = t.auto_scale(p, "scaled-jacobi")
    return t.make_setup(p, s, t.aggregation_restriction(64, 16))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

import warnings

import pytest


@pytest.fixture(autouse=True)
def _quiet_small_box_warning():
    # the standard forcing set is not hypoelliptic in the N = 2 box; tests run there on purpose
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*is not hypoelliptic.*")
        yield


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])

"""Shared pytest config: per-criterion summary lines for the acceptance gate."""

import pytest

_CRITERION_RESULTS = {}
_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(number, title): top-level acceptance criterion covered by this test",
    )


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when not in ("setup", "call"):
        return
    number, title = mark.args
    if call.excinfo is None:
        state = "PASS"
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        state = "SKIP"
    else:
        state = "FAIL"
    prev = _CRITERION_RESULTS.get(number, (title, "PASS"))[1]
    if _RANK[state] >= _RANK[prev]:
        _CRITERION_RESULTS[number] = (title, state)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERION_RESULTS):
        title, state = _CRITERION_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {state}  {title}")

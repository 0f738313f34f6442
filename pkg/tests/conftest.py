"""Prints one PASS/FAIL line per acceptance criterion after the run."""

import pytest

_ACCEPT_RESULTS = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        label = item.name.removeprefix("test_accept_").replace("_", " ", 1)
        _ACCEPT_RESULTS.append((label, report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPT_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for label, ok in sorted(_ACCEPT_RESULTS):
        terminalreporter.write_line(f"ACCEPT {label}: {'PASS' if ok else 'FAIL'}")

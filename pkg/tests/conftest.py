"""Shared pytest wiring: a per-criterion pass/fail summary.

Acceptance tests are named ``test_criterion_<n>``; after the run a short
section lists one line per criterion so the verdicts can be read without
scanning the full log.
"""

import re

_CRITERION = re.compile(r"test_criterion_(\d+)")
_results: dict[int, str] = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if match is None:
        return
    number = int(match.group(1))
    if report.when == "call":
        _results[number] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.failed:
        _results[number] = "FAIL"
    elif report.when == "setup" and report.skipped:
        _results[number] = "SKIP"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        terminalreporter.write_line(f"criterion {number}: {_results[number]}")

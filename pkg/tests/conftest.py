"""Shared fixtures: verdict reporting for the acceptance gate.

Acceptance tests record one PASS/FAIL line each through the ``verdict``
fixture; the lines are replayed in a terminal-summary section so they stay
visible under output capture.
"""

import pytest

_verdicts = []


@pytest.fixture
def verdict():
    def _record(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} [{label}] {detail}"
        _verdicts.append(line)
        assert ok, line

    return _record


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance verdicts")
        for line in _verdicts:
            terminalreporter.write_line(line)

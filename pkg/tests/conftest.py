"""Shared fixtures; collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

import pytest

_LINES = {}


@pytest.fixture
def acceptance(capsys):
    """``acceptance(k, ok, detail)`` records the outcome of criterion ``k`` and echoes it."""

    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[k] = line
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        terminalreporter.write_line(_LINES[k])

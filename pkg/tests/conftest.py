"""Shared fixtures: the pinned evaluation corpus and the criteria summary hook."""

import pytest

from _corpus import build_pinned_corpus

_criteria_lines: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    """Collect one pass/fail line per acceptance criterion for the summary."""
    _criteria_lines.append(f"[{name}] {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _criteria_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _criteria_lines:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pinned_corpus():
    """The fixed-seed evaluation corpus shared by the trend and regression tests."""
    return build_pinned_corpus()

"""Shared pytest hooks.

test_acceptance.py registers one verdict line per criterion through the
record_criterion fixture; replaying the lines in the terminal summary keeps
them visible regardless of output capture.
"""

import pytest

criterion_lines: list[str] = []


def _record(name: str, passed: bool, detail: str = "") -> None:
    line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    criterion_lines.append(line)
    print(line, flush=True)


@pytest.fixture
def record_criterion():
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in criterion_lines:
        terminalreporter.write_line(line)

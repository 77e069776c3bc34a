import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome and fail the test if it does not hold."""

    def check(number, label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {label}"
        if detail:
            line += f" ({detail})"
        _LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)

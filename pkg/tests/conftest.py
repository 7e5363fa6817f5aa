import pytest

_LINES = []


@pytest.fixture
def criterion():
    """``report(num, title, ok, detail)`` prints and records one PASS/FAIL line."""

    def report(num, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {num:>2}: {title}"
        if detail:
            line += f"  [{detail}]"
        _LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)

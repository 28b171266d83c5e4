import pytest

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line; call with (number, title, passed, detail)."""

    def record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" -- {detail}"
        _ACCEPTANCE.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)

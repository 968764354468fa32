import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion(capsys):
    """Record one acceptance line: ``criterion(n, title, passed, detail)``."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {title}"
        if detail:
            line += f" | {detail}"
        _CRITERIA[number] = line
        with capsys.disabled():
            print("\n" + line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number])

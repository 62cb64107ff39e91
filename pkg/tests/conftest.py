import pytest

_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def record():
    """record(n, ok, detail) stores the one-line verdict of acceptance criterion n."""

    def _record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[number] = line
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])

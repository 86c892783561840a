import pytest

# Acceptance tests append (criterion, passed, detail); printed once at the end of the run.
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


@pytest.fixture
def acceptance_line():
    def record(criterion: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append((criterion, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

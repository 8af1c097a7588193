import pytest

# lines appended by the acceptance tests, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def report():
    def emit(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)
    return emit

import pytest

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log():
    def log(criterion: int, passed: bool, detail: str):
        line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return log

_criterion_lines = []


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)


import pytest


@pytest.fixture
def criterion():
    """Record a one-line pass/fail verdict shown in the terminal summary."""

    def _record(line):
        _criterion_lines.append(line)
        print(line)

    return _record

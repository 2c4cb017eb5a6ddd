"""Collects one summary line per acceptance check for the final report."""

_LINES: list[str] = []


def acceptance_line(text: str) -> None:
    _LINES.append(text)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)

"""Shared pytest plumbing: the acceptance tests record one line per
criterion here, and the terminal summary prints them after the run so the
pass/fail status of every criterion is visible without -s."""

_CRITERION_LINES = []


def record_criterion(line: str):
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)

"""Shared pytest plumbing: the acceptance suite registers one PASS/FAIL line
per criterion and the lines are echoed in the terminal summary, so they are
visible regardless of output capture."""

acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)

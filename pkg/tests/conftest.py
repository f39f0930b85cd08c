"""Collects one verdict line per acceptance criterion and prints them after the run."""

ACCEPTANCE_LINES = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"{criterion}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

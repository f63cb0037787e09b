"""Collects one verdict line per acceptance criterion and prints them after the run."""

CRITERIA: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: int(k[1:])):
        ok, detail = CRITERIA[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")

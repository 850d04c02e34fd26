"""Shared test helpers, plus the acceptance checklist reporter.

The acceptance tests record one verdict line per criterion; the terminal
summary hook replays them at the end of the run so the checklist is
visible even when pytest captures stdout.
"""

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, description: str, ok: bool, detail: str = "") -> bool:
    verdict = "PASS" if ok else "FAIL"
    line = f"[{verdict}] criterion {number:2d}: {description}"
    if detail:
        line += f"  ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

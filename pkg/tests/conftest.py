"""Shared pytest configuration: acceptance-criterion verdict reporting."""

VERDICTS: list[tuple[int, str, bool, str]] = []


def record_verdict(number: int, title: str, passed: bool, detail: str) -> None:
    VERDICTS.append((number, title, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(VERDICTS):
        word = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"criterion {number:2d} [{word}] {title}: {detail}")

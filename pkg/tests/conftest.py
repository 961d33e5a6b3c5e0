import pytest

_LINES: list[tuple[int, str, str]] = []


class CriterionLog:
    def record(self, number: int, passed: bool, detail: str):
        line = (number, "PASS" if passed else "FAIL", detail)
        _LINES.append(line)
        print(f"[criterion {number}] {line[1]} {detail}")


@pytest.fixture(scope="session")
def criterion():
    return CriterionLog()


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(f"[criterion {number}] {status} {detail}")

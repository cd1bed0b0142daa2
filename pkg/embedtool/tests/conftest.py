"""Secondary acceptance reporting for the embedding exporter tests."""

import pytest

_CRITERION_LINES: list[str] = []


@pytest.fixture()
def record_criterion_line():
    def record(name: str, ok: bool, detail: str) -> None:
        status = "PASS" if ok else "FAIL"
        _CRITERION_LINES.append(f"[{name}] {status}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("secondary acceptance")
    for line in _CRITERION_LINES:
        terminalreporter.write_line(line)

import warnings

import pytest

ACCEPTANCE = []


@pytest.fixture
def record():
    """Log one PASS/FAIL line per acceptance criterion, then assert it."""
    def _record(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return _record


@pytest.fixture(autouse=True)
def _quiet_periodic_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*has period.*")
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

import pytest

N_CRITERIA = 11

# criterion number -> (title, passed, detail)
_RESULTS: dict = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for the acceptance summary, then assert it."""
    def record(number, title, passed, detail=""):
        _RESULTS[number] = (title, bool(passed), detail)
        assert passed, f"criterion {number} ({title}) failed: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, max(N_CRITERIA, max(_RESULTS)) + 1):
        title, ok, detail = _RESULTS.get(n, ("(not run)", False, "test errored before reporting"))
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")

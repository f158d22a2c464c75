import time
from contextlib import contextmanager

import pytest

_RESULTS = []


@pytest.fixture
def criterion():
    """Context manager recording PASS/FAIL and wall time for one acceptance criterion."""

    @contextmanager
    def run(number, title, budget_s=None):
        t0 = time.perf_counter()
        status = "FAIL"
        try:
            yield
            elapsed = time.perf_counter() - t0
            if budget_s is not None:
                assert elapsed < budget_s, f"took {elapsed:.1f} s, budget {budget_s} s"
            status = "PASS"
        finally:
            _RESULTS.append((number, title, status, time.perf_counter() - t0))
            print(f"{status} criterion {number}: {title}")

    return run


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, secs in sorted(_RESULTS):
        terminalreporter.write_line(f"{status}  {number:>2}. {title} ({secs:.1f} s)")

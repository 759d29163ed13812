import numpy as np
import pytest

from stapulse.dynamics import Model

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def model():
    return Model()


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(n: int, ok: bool, detail: str):
        ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

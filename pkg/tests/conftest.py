import numpy as np
import pytest

from mgpboot.rand_core import RngState


@pytest.fixture
def rng():
    return RngState(12345, 0)


@pytest.fixture
def gen():
    return np.random.default_rng(2024)


_CRITERIA = {}


@pytest.fixture
def record():
    """Record a one-line verdict for an acceptance criterion, then assert it."""

    def _record(number, ok, detail):
        _CRITERIA[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")

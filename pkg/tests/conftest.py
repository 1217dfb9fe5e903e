import numpy as np
import pytest

from trapsmooth import _accel


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run a test once per kernel backend and restore the flag afterwards."""
    if request.param == "numba" and not _accel.NUMBA_AVAILABLE:
        pytest.skip("numba not installed")
    saved = _accel.USE_NUMBA
    _accel.USE_NUMBA = request.param == "numba"
    yield request.param
    _accel.USE_NUMBA = saved


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_VERDICTS = []


@pytest.fixture(scope="session")
def verdicts():
    """Acceptance lines collected for the end-of-run summary."""
    return _VERDICTS


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)

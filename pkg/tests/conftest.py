import numpy as np
import pytest

from dualfas import permanent

BACKENDS = ["python"]
try:
    from dualfas.permanent import _ckernels  # noqa: F401

    BACKENDS.append("cython")
except ImportError:
    pass


@pytest.fixture(params=BACKENDS)
def backend(request):
    before = permanent.BACKEND
    permanent.use_backend(request.param)
    yield request.param
    permanent.use_backend(before)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

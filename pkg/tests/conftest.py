import numpy as np
import pytest

from cascadia import kernels
from cascadia import reference as R
from cascadia.graph_core import build_graph

ACCEPTANCE_LINES = []

BACKENDS = ["python"] + (["compiled"] if kernels.BACKEND == "compiled" else [])


@pytest.fixture
def six():
    return R.graph()


@pytest.fixture
def two():
    return build_graph(2, [(1, 2)])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

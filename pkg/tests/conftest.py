import math

import numpy as np
import pytest

from spikectl.model import builtin_model
from spikectl.prior import make_atomic_prior, uniform_prior

FIG1_ATOMS = [(0, 1), (0.25, 2), (0.5, 4), (0.75, 2), (1, 1)]

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def two_point():
    return make_atomic_prior([(0, 0.5), (1, 0.5)])


@pytest.fixture
def fig1_prior():
    return make_atomic_prior(FIG1_ATOMS)


@pytest.fixture
def unif_prior():
    return uniform_prior(0.0, 2.0, 64)


@pytest.fixture
def dirac():
    return make_atomic_prior([(1, 1)])


@pytest.fixture(params=["two_point", "fig1", "uniform"])
def any_prior(request):
    return {
        "two_point": make_atomic_prior([(0, 0.5), (1, 0.5)]),
        "fig1": make_atomic_prior(FIG1_ATOMS),
        "uniform": uniform_prior(0.0, 2.0, 64),
    }[request.param]


@pytest.fixture
def const_unit():
    return builtin_model("const_unit")


@pytest.fixture
def ou_exp():
    return builtin_model("ou_exp")


@pytest.fixture
def ou_sigmoid():
    return builtin_model("ou_sigmoid")


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

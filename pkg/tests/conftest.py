import numpy as np
import pytest

from pdmilp.model import e1, e2, e3


@pytest.fixture
def E1():
    return e1()


@pytest.fixture
def E2():
    return e2()


@pytest.fixture
def E3():
    return e3()


@pytest.fixture
def rng():
    return np.random.default_rng(2024)

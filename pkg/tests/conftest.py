import numpy as np
import pytest

from oracles import sym


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def make_sym(rng):
    def factory(n, scale=1.0):
        return sym(rng, n, scale)

    return factory


@pytest.fixture
def pair(make_sym):
    a = make_sym(12)
    b = 0.4 * a + make_sym(12)
    return a, b

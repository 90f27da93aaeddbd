import numpy as np
import pytest

from gridlight.nn import backends


@pytest.fixture(params=backends.available())
def backend(request):
    return backends.get_backend(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def chain_neighborhoods(n):
    """Path-graph neighborhoods including self, for kernel tests."""
    return [[i] + [j for j in (i - 1, i + 1) if 0 <= j < n] for i in range(n)]

import loguru
import numpy as np
import pytest

from gf_grid import DIRICHLET_ZERO, PERIODIC, Grid


@pytest.fixture(autouse=True)
def reset_logging():
    """ CLI tests install sinks bound to captured streams, drop them after every test """

    yield
    loguru.logger.remove()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=[(PERIODIC, (12,)), (DIRICHLET_ZERO, (12,)), (PERIODIC, (6, 8)), (DIRICHLET_ZERO, (7, 5))], ids=lambda _: f"{_[0]}-{len(_[1])}d")
def any_grid(request):
    boundary, shape = request.param
    return Grid(shape, 0.5, boundary)

import numpy as np
import pytest

from wavescat import make_grid


@pytest.fixture
def grid1d():
    return make_grid(d=1, n=64, L=np.pi, k=1)


@pytest.fixture
def grid2d():
    return make_grid(d=2, n=16, L=8.0, k=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(grid, rng, batch=()):
    shape = batch + grid.spatial_shape + (grid.k,)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

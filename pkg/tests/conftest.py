import numpy as np
import pytest
from hypothesis import settings

from fnls import spectral as sp

settings.register_profile("fnls", deadline=None, max_examples=40)
settings.load_profile("fnls")


@pytest.fixture
def grid2():
    return sp.make_grid(2, 32, 20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def random_field(grid, rng, band_limited=False):
    vals = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    f = sp.SpectralField(grid, vals)
    return sp.dealias(f).to_physical() if band_limited else f

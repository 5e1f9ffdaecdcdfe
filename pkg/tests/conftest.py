import numpy as np
import pytest
from hypothesis import settings

from vlasovlab.grid import build_grid

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture
def grid64():
    return build_grid(64, 128, 8.0)


@pytest.fixture
def gaussian_field(grid64):
    return grid64.sample(lambda x, v: (1 + 0.1 * np.cos(2 * np.pi * x)) * np.exp(-v**2 / 2))

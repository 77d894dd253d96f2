import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracorn.geometry import Box
from fracorn.quadrature import make_grid
from fracorn.seminorms import FracParams

settings.register_profile("fracorn", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fracorn")


@pytest.fixture(scope="session")
def unit_grid8():
    return make_grid(Box.unit(2), 1 / 8)


@pytest.fixture(scope="session")
def unit_grid16():
    return make_grid(Box.unit(2), 1 / 16)


@pytest.fixture(scope="session")
def P52():
    return FracParams(0.5, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

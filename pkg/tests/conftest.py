import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ncwave.diffops import DiracPairSpec, wave_operator
from ncwave.green import GreenOperator
from ncwave.lattice import make_grid

settings.register_profile(
    "ncwave", deadline=None, max_examples=20, suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture]
)
settings.load_profile("ncwave")


@pytest.fixture(scope="session")
def grid():
    # coarse stand-in for the default grid: same aspect, fewer points
    return make_grid(101, 201, 0.01, 0.02, -0.5, -2.0)


@pytest.fixture(scope="session")
def G(grid):
    return GreenOperator(wave_operator(grid, 1.0))


@pytest.fixture(scope="session")
def G0(grid):
    return GreenOperator(wave_operator(grid, 0.0))


@pytest.fixture(scope="session")
def GD(grid):
    return GreenOperator(DiracPairSpec(grid.with_components(2), 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

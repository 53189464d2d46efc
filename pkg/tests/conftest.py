import numpy as np
import pytest

from obstacle_lab import kernels
from obstacle_lab.grid import make_cylinder_grid
from obstacle_lab.pde import PParams

BACKENDS = ["python"] + (["compiled"] if kernels.compiled_available() else [])


@pytest.fixture
def small_grid():
    return make_cylinder_grid(0.0, 1.0, 32, 1.0, 32)


@pytest.fixture
def params():
    return PParams(p=3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.get_backend(request.param)

import numpy as np
import pytest

from acsflow import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # JIT compilation happens once here so timed tests measure computation
    _kernels.warmup()


@pytest.fixture
def grid256():
    from acsflow.geometry import AngularGrid

    return AngularGrid(256)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

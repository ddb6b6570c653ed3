import numpy as np
import pytest

from qle.sphere import SphereGrid


@pytest.fixture(scope="session")
def grid():
    return SphereGrid(15)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

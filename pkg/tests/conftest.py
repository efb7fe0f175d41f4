import numpy as np
import pytest

from strict_saddle.tensor4 import OrthoBasis, make_orthogonal_tensor


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def basis3(rng):
    return OrthoBasis.random(3, rng)


@pytest.fixture
def tensor3(basis3):
    return make_orthogonal_tensor(basis3)

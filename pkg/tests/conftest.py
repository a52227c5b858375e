import numpy as np
import pytest

from modules.boltzmann_networks import NetworkParams
from modules.noise import RngStream


@pytest.fixture
def rng():
    return RngStream(20240517)


@pytest.fixture
def three_neurons():
    """Fixed random network with |W|, |b| <= 1."""
    return NetworkParams.random(3, 1.0, RngStream(7))


@pytest.fixture
def two_neurons():
    return NetworkParams(np.array([[0.0, 0.8], [0.8, 0.0]]), np.array([-0.3, 0.5]))

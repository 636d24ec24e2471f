import numpy as np
import pytest

from noisyperm.packing import ChannelMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def three_by_three():
    return ChannelMatrix([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])

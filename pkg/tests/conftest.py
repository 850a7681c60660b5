import numpy as np
import pytest

from swmix.markov import depolarizing, identity_map, random_markov_family, unitary_conjugation

ROTATION_PHASE = 1.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def rotation():
    return unitary_conjugation(np.diag([1, np.exp(1j * ROTATION_PHASE)]))


@pytest.fixture(scope="session")
def gallery(rotation):
    return [depolarizing(0.3), rotation, identity_map()]


@pytest.fixture(scope="session")
def random_maps():
    return random_markov_family(100, seed=2024)

import numpy as np
import pytest

from mml import channels, kitaev, oracle
from mml.fgs import QuadraticGenerator


def random_antisymmetric(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim)) * scale
    return a - a.T


def random_mixed_cm(rng, modes, beta_range=(0.3, 1.5)):
    from mml.fgs import thermal_cm

    gen = QuadraticGenerator(random_antisymmetric(rng, 2 * modes))
    return thermal_cm(gen, rng.uniform(*beta_range))


@pytest.fixture(scope="session")
def small_chain():
    return kitaev.ChainParams(N=3, mu=0.2, delta=1.0)


@pytest.fixture(scope="session")
def small_ensemble(small_chain):
    return channels.quench_ensemble(small_chain, 1.0, 1.5, 3)


@pytest.fixture(scope="session")
def dense_pair(small_chain):
    return oracle.dense_ground_pair(small_chain)


@pytest.fixture(scope="session")
def dense_hams(small_ensemble):
    return [oracle.dense_hamiltonian(QuadraticGenerator(m.segments[0][0].data))
            for m in small_ensemble.members]

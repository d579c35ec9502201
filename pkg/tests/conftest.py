import numpy as np
import pytest

from shaken_lattice import bloch, make_default_config
from shaken_lattice.propagator import DEFAULT_BASIS_SIZE


@pytest.fixture(scope="session")
def lattice():
    return make_default_config()


@pytest.fixture(scope="session")
def ground(lattice):
    return bloch.ground_state(lattice, DEFAULT_BASIS_SIZE)


@pytest.fixture(scope="session")
def ground_pops(ground):
    return bloch.populations_of(ground)


@pytest.fixture(scope="session")
def table1_ground_row():
    """Tabulated ground-state populations for n = -2..2 at V0 = 10 E_R."""
    return np.array([0.0026, 0.1345, 0.7259, 0.1345, 0.0026])

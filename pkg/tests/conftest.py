import numpy as np
import pytest

from anharmonic import AnharmonicSystem, gaussian_pair_potential, gaussian_site_potential
from harmonic import HarmonicParams
from lattice import PhasePoint, make_lattice


@pytest.fixture
def chain():
    return make_lattice(1, 8)


@pytest.fixture
def short_chain():
    return make_lattice(1, 4)


@pytest.fixture
def square():
    return make_lattice(2, 4)


@pytest.fixture
def unit_params():
    return HarmonicParams(omega=1.0, lam=(1.0,))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def random_point(rng):
    def draw(size, amplitude=1.0):
        return PhasePoint(rng.uniform(-amplitude, amplitude, size), rng.uniform(-amplitude, amplitude, size))

    return draw


@pytest.fixture
def site_system(short_chain, unit_params):
    return AnharmonicSystem(short_chain, unit_params, site_potential=gaussian_site_potential())


@pytest.fixture
def pair_system(short_chain, unit_params):
    return AnharmonicSystem(short_chain, unit_params, pair_potential=gaussian_pair_potential(0.5, 1.0, 1.0))


@pytest.fixture
def write_config(tmp_path):
    def write(text, name="experiment.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write

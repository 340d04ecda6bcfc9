from pathlib import Path

import numpy as np
import pytest

from cgks.kinetic import primitive_to_conserved
from cgks.mesh_tools import BoxSpec, gen_box, read_msh

FIXTURES = Path(__file__).parent / "fixtures"


def random_states(rng, n, gamma=1.4, speed=1.0):
    """Physical conserved states with ρ in [0.5, 2], p in [0.5, 2], |U_i| < speed."""
    rho = rng.uniform(0.5, 2.0, n)
    U = rng.uniform(-speed, speed, (n, 3))
    p = rng.uniform(0.5, 2.0, n)
    return primitive_to_conserved(rho, U, p, gamma)


def random_quadratic(rng):
    """Callable field and gradient of a random global quadratic, five components."""
    c0 = rng.normal(size=5)
    lin = rng.normal(size=(3, 5))
    quad = rng.normal(size=(3, 3, 5))
    quad = 0.5 * (quad + np.swapaxes(quad, 0, 1))
    origin = np.array([0.3, -0.2, 0.1])

    def field(x):
        d = x - origin
        return c0 + np.einsum("...i,iv->...v", d, lin) + np.einsum("...i,ijv,...j->...v", d, quad, d)

    def gradient(x):
        d = x - origin
        return lin + 2.0 * np.einsum("ijv,...j->...iv", quad, d)

    return field, gradient


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def periodic_hex():
    return gen_box(BoxSpec(cells=4, style="hex"))


@pytest.fixture(scope="session")
def periodic_tet():
    return gen_box(BoxSpec(cells=3, style="tet6"))


@pytest.fixture(scope="session")
def open_hex():
    return gen_box(BoxSpec(cells=5, style="hex", periodic=()))


@pytest.fixture(scope="session")
def open_tet():
    return gen_box(BoxSpec(cells=4, style="tet6", periodic=()))


@pytest.fixture(scope="session")
def open_hybrid():
    return gen_box(BoxSpec(cells=4, style="hybrid", periodic=()))


@pytest.fixture(scope="session")
def single_hex():
    return read_msh(FIXTURES / "single_hex.msh")


@pytest.fixture(scope="session")
def mixed_mesh():
    return read_msh(FIXTURES / "mixed_prism_pyramid.msh")

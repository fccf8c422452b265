"""Shared fixtures for the test suite.

Systems are assembled once per session where reuse is safe; anything a
test mutates gets a fresh build.
"""

import numpy as np
import pytest

from bresse.model import ModelParams
from bresse.discretization import assemble, build_mesh


def make_params(**overrides):
    """Unit parameter set with damping on (0.25, 0.75); override freely."""
    base = dict(
        rho1=1.0, rho2=1.0, k1=1.0, k2=1.0, k3=1.0,
        l=1.0, L=1.0, d0=1.0, alpha=0.25, beta=0.75,
    )
    base.update(overrides)
    return ModelParams(**base)


def make_system(n, **overrides):
    p = make_params(**overrides)
    return assemble(p, build_mesh(p, n))


@pytest.fixture(scope="session")
def default_params():
    return make_params()


@pytest.fixture(scope="session")
def sys16():
    return make_system(16)


@pytest.fixture(scope="session")
def sys32():
    return make_system(32)


@pytest.fixture(scope="session")
def sys64():
    return make_system(64)


@pytest.fixture(scope="session")
def sys16_undamped():
    return make_system(16, d0=0.0)


def random_state(sys, rng, complex_valued=False):
    """Random state vector sized for the given system."""
    from bresse.discretization import StateVector

    n = sys.n_dofs
    if complex_valued:
        q = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    else:
        q = rng.standard_normal(n)
        v = rng.standard_normal(n)
    return StateVector(q, v)

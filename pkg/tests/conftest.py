import numpy as np
import pytest

from vegoc import (CanonicalSystem, ParameterSet, PrivateSystem,
                   assemble_operators, build_interval_mesh, build_rect_mesh)


@pytest.fixture(scope="session")
def params():
    return ParameterSet()


@pytest.fixture(scope="session")
def ops64():
    return assemble_operators(build_interval_mesh(5.0, 64))


@pytest.fixture(scope="session")
def ops30():
    return assemble_operators(build_interval_mesh(5.0, 30))


@pytest.fixture(scope="session")
def ops2d_small():
    return assemble_operators(build_rect_mesh(5.0, 8, 6))


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_admissible_state(system, rng, flat=False):
    """Random state with v, w positive and lam safely below p."""
    n = system.n
    if system.ncomp == 2:
        if flat:
            v = np.full(n, rng.uniform(50, 300))
            w = np.full(n, rng.uniform(5, 60))
        else:
            v = rng.uniform(20, 300, n)
            w = rng.uniform(5, 60, n)
        return np.concatenate([v, w])
    if flat:
        v = np.full(n, rng.uniform(50, 400))
        w = np.full(n, rng.uniform(5, 50))
        lam = np.full(n, rng.uniform(0.1, 0.8))
        mu = np.full(n, rng.uniform(0.1, 1.5))
    else:
        v = rng.uniform(20, 400, n)
        w = rng.uniform(5, 50, n)
        lam = rng.uniform(0.05, 0.85, n)
        mu = rng.uniform(0.05, 1.5, n)
    return np.concatenate([v, w, lam, mu])


@pytest.fixture
def canonical64(params, ops64):
    return CanonicalSystem(params, ops64)


@pytest.fixture
def private64(params, ops64):
    return PrivateSystem(params, ops64)

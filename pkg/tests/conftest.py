"""Shared fixtures: the solves are cached per session because the dense
eigendecompositions dominate the suite's runtime."""

import numpy as np
import pytest

from heatcoef.catalog import initial_state, make_coefficient
from heatcoef.fem import apply_dirichlet, assemble_pair
from heatcoef.mesh import build_structured_mesh
from heatcoef.spectral import solve_generalized_eig


@pytest.fixture(scope="session")
def mesh32():
    return build_structured_mesh(32, 32)


@pytest.fixture(scope="session")
def mesh16():
    return build_structured_mesh(16, 16)


@pytest.fixture(scope="session")
def unit_pair32(mesh32):
    return apply_dirichlet(assemble_pair(mesh32, 1.0), mesh32)


@pytest.fixture(scope="session")
def unit_spec32(unit_pair32):
    """Unit-coefficient decomposition, K=10 (the analytic-oracle workhorse)."""
    return solve_generalized_eig(unit_pair32, 10, 1e-6)


@pytest.fixture(scope="session")
def bump32(mesh32):
    return make_coefficient(mesh32, "gaussian-bump", {"base": 1.0, "amplitude": 0.5}, 2.0)


@pytest.fixture(scope="session")
def bump_pair32(mesh32, bump32):
    return apply_dirichlet(assemble_pair(mesh32, bump32.values), mesh32)


@pytest.fixture(scope="session")
def bump_spec32(bump_pair32):
    return solve_generalized_eig(bump_pair32, 8, 1e-6)


@pytest.fixture(scope="session")
def d_omega32(mesh32):
    return initial_state(mesh32, "d_Omega")


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)

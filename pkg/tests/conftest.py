import numpy as np
import pytest

from nskstab.dispersion import DispersionSolver
from nskstab.mesh import build_mesh
from nskstab.profile import PhysicalParams, make_profile

# reference configuration used across the suite: linear profile rho0 = 1 + x3
REF_PARAMS = PhysicalParams(g=1.0, mu=0.1, sigma=0.02, L=1.0)


@pytest.fixture(scope="session")
def linear_profile():
    return make_profile("linear", [1.0, 1.0])


@pytest.fixture(scope="session")
def exp_profile():
    return make_profile("exponential", [1.0, 1.0])


@pytest.fixture(scope="session")
def params():
    return REF_PARAMS


@pytest.fixture(scope="session")
def mesh32():
    return build_mesh(32)


@pytest.fixture(scope="session")
def mesh64():
    return build_mesh(64)


@pytest.fixture(scope="session")
def mesh128():
    return build_mesh(128)


@pytest.fixture(scope="session")
def solver64(mesh64, linear_profile, params):
    return DispersionSolver(mesh64, linear_profile, params)


@pytest.fixture(scope="session")
def cv_pi_1(solver64):
    """lambda_1 at k = pi for the reference configuration."""
    cv = solver64.solve_lambda_j(np.pi, 1)
    assert cv is not None
    return cv

import numpy as np
import pytest

from hydrofluct.eos import IdealGasEos
from hydrofluct.generator import linearize
from hydrofluct.grid import Grid
from hydrofluct.model import BoundarySpec, HydroModel, Insulated, Reservoir
from hydrofluct.noise import noise_matrix
from hydrofluct.process import OuSystem, stationary_covariance_lyapunov
from hydrofluct.transport import power_law_transport

CV = 1.5


def mu_matching_pressure(beta: float, pressure: float, cv: float = CV, s_ref: float = 0.0):
    """Chemical potential putting the default EOS at the given (beta, p)."""
    r0 = pressure * beta
    e0 = cv * r0 / beta
    sr = cv * np.log(e0 / r0) - cv - np.log(r0) - 1.0 + s_ref
    return float(-sr / beta)


def make_model(
    shape,
    beta_left=1.0,
    beta_right=1.0,
    pressure=1.0,
    kappa0=0.5,
    kappa_exponent=1.0,
    gamma1=None,
    gamma2=0.2,
    insulated_transverse=False,
    stabilization=1.0,
):
    grid = Grid(shape)
    if gamma1 is None:
        gamma1 = 0.0 if grid.d == 1 else 0.3
    tc = power_law_transport(
        kappa0=kappa0, kappa_exponent=kappa_exponent, gamma1=gamma1, gamma2=gamma2
    )
    sides = {
        (0, 0): Reservoir(beta_left, mu_matching_pressure(beta_left, pressure)),
        (0, 1): Reservoir(beta_right, mu_matching_pressure(beta_right, pressure)),
    }
    if grid.d == 2:
        if insulated_transverse:
            sides[(1, 0)] = Insulated()
            sides[(1, 1)] = Insulated()
        else:
            mid = Reservoir(beta_left, mu_matching_pressure(beta_left, pressure))
            sides[(1, 0)] = mid
            sides[(1, 1)] = mid
    eos = IdealGasEos(CV, 0.0)
    return HydroModel(grid, eos, tc, BoundarySpec(sides), stabilization=stabilization)


@pytest.fixture(scope="session")
def eos():
    return IdealGasEos(CV, 0.0)


@pytest.fixture(scope="session")
def eq_model_1d():
    return make_model((24,))


@pytest.fixture(scope="session")
def eq_steady_1d(eq_model_1d):
    return eq_model_1d.steady_solve()


@pytest.fixture(scope="session")
def neq_model_1d():
    return make_model((24,), beta_left=1.2)


@pytest.fixture(scope="session")
def neq_steady_1d(neq_model_1d):
    return neq_model_1d.steady_solve()


@pytest.fixture(scope="session")
def eq_system_1d(eq_model_1d, eq_steady_1d):
    gen = linearize(eq_model_1d, eq_steady_1d)
    nc = noise_matrix(eq_model_1d, eq_steady_1d)
    return OuSystem.build(eq_model_1d.grid, gen, nc)


@pytest.fixture(scope="session")
def eq_W_1d(eq_system_1d):
    return stationary_covariance_lyapunov(eq_system_1d)


@pytest.fixture(scope="session")
def neq_system_1d(neq_model_1d, neq_steady_1d):
    gen = linearize(neq_model_1d, neq_steady_1d)
    nc = noise_matrix(neq_model_1d, neq_steady_1d)
    return OuSystem.build(neq_model_1d.grid, gen, nc)

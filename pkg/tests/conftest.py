import numpy as np
import pytest

from vibrocontrol.eigensolver import relax_vibrational_basis, solve_bo_curves
from vibrocontrol.experiments import SimulationContext
from vibrocontrol.model import Grid2D, ModelParams, build_potential

TABLE1 = np.array([-0.776, -0.767, -0.758, -0.749, -0.741])


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def smoke_grid():
    return Grid2D.smoke()


@pytest.fixture(scope="session")
def smoke_potential(smoke_grid, params):
    return build_potential(smoke_grid, params)


@pytest.fixture(scope="session")
def smoke_curves(smoke_grid, params):
    return solve_bo_curves(smoke_grid, params)


@pytest.fixture(scope="session")
def smoke_basis(smoke_grid, params, smoke_potential, smoke_curves):
    return relax_vibrational_basis(smoke_grid, params, n_states=7,
                                   V=smoke_potential, curves=smoke_curves)


@pytest.fixture(scope="session")
def smoke_ctx(smoke_grid, params, smoke_basis):
    return SimulationContext.build(grid=smoke_grid, params=params,
                                   basis=smoke_basis)


@pytest.fixture(scope="session")
def tiny_grid():
    return Grid2D(R_min=0.3, R_max=6.0, dR=0.09, x_min=-6.0, x_max=6.0, dx=0.2,
                  absorber_width_R=0.5, absorber_width_x=0.5)


@pytest.fixture(scope="session")
def tiny_setup(tiny_grid, params):
    V = build_potential(tiny_grid, params)
    curves = solve_bo_curves(tiny_grid, params)
    basis = relax_vibrational_basis(tiny_grid, params, n_states=1, V=V,
                                    curves=curves)
    return tiny_grid, V, basis

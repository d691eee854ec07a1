import numpy as np
import pytest

from dediscover import DiffConfig, LibrarySpec, SimSpec, build_library, build_response
from dediscover import differentiate_dataset, simulate


@pytest.fixture(scope="session")
def lorenz_spec():
    return SimSpec("lorenz63", dt=1e-3, n_steps=10000)


@pytest.fixture(scope="session")
def lorenz_data(lorenz_spec):
    return simulate(lorenz_spec)


@pytest.fixture(scope="session")
def lorenz_problem(lorenz_data):
    """Clean Lorenz design/response pair with the degree-2 library."""
    derivs = differentiate_dataset(lorenz_data, DiffConfig("central_fd"))
    return build_library(lorenz_data, derivs, LibrarySpec(poly_degree=2)), build_response(derivs)


def random_well_conditioned(rng, n=60, D=6, N=2):
    F = rng.standard_normal((n, D))
    M = rng.standard_normal((D, N)) * (rng.random((D, N)) < 0.6) * 3
    U = F @ M + 0.05 * rng.standard_normal((n, N))
    return F, U

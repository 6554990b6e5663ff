import numpy as np
import pytest

from gridcert import base_point, build_network, load_bundled
from gridcert.feeders import synthetic_radial_case


@pytest.fixture(scope="session")
def case2_model():
    return build_network(load_bundled("case2"))


@pytest.fixture(scope="session")
def case33_model():
    return build_network(load_bundled("case33"))


@pytest.fixture(scope="session")
def ten_bus_model():
    return build_network(synthetic_radial_case(10, seed=3))


@pytest.fixture(scope="session")
def case2_base(case2_model):
    # Zero base load: the classic zero-loading base point.
    return base_point(case2_model, np.zeros(case2_model.n, dtype=complex), tol=1e-12)


@pytest.fixture(scope="session")
def case33_base(case33_model):
    return base_point(case33_model, case33_model.s_base, tol=1e-12)


@pytest.fixture(scope="session")
def ten_bus_base(ten_bus_model):
    return base_point(ten_bus_model, ten_bus_model.s_base, tol=1e-12)

import pytest

from qlsing import ProblemParams
from qlsing.sphere_ode import SphericalGrid, solve_profile


@pytest.fixture(scope="session")
def profile_n2q2():
    return solve_profile(ProblemParams(N=2, q=2.0), SphericalGrid(2001))


@pytest.fixture(scope="session")
def profile_n3q4():
    return solve_profile(ProblemParams(N=3, q=4.0), SphericalGrid(2001))

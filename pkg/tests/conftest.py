import time
import warnings

import numpy as np
import pytest

from glrtexp import chernoff, families, glm, nonsep

# Reference values for the three workhorse testing problems, computed by
# the high-precision scratch runs that seeded this suite and confirmed
# against independent quadrature; coordinates are the least favorable
# parameter pairs.
EX1 = {"theta": 1.2797266, "gamma": 1.7198920, "rho": 0.019767973}
EX2 = {"theta": 1.0, "gamma": 0.9261949, "rho": 0.022735073}
EX3_SIGMA = [[1.0, 0.1, 0.1], [0.1, 1.0, 0.1], [0.1, 0.1, 1.0]]
EX3 = {"beta0": [1.0, 2.0], "rho": 0.4546260}


@pytest.fixture(scope="session")
def lognormal():
    return families.lognormal()


@pytest.fixture(scope="session")
def exponential():
    return families.exponential()


@pytest.fixture(scope="session")
def poisson_ex2():
    return families.poisson(lower=1.0)


@pytest.fixture(scope="session")
def geometric_ex2():
    return families.geometric(lower=0.5)


@pytest.fixture(scope="session")
def gaussian():
    return families.gaussian()


@pytest.fixture(scope="session")
def ex1_index(lognormal, exponential):
    """Timed full minimization for the lognormal / exponential pair."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        t0 = time.perf_counter()
        res = chernoff.generalized_index(lognormal, exponential)
        elapsed = time.perf_counter() - t0
    return res, elapsed


@pytest.fixture(scope="session")
def ex2_index(poisson_ex2, geometric_ex2):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        t0 = time.perf_counter()
        res = chernoff.generalized_index(poisson_ex2, geometric_ex2)
        elapsed = time.perf_counter() - t0
    return res, elapsed


@pytest.fixture(scope="session")
def ex3_tilt():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        t0 = time.perf_counter()
        tilt = glm.gaussian_joint_tilt(EX3_SIGMA, EX3["beta0"], 0.0)
        elapsed = time.perf_counter() - t0
    return tilt, elapsed


@pytest.fixture(scope="session")
def ex1_tilt(lognormal, exponential):
    """Tilt program solved at the Example-1 least favorable truth."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return nonsep.solve_tilt(lognormal, exponential,
                                 theta0=EX1["theta"], b=0.0)


@pytest.fixture(scope="session")
def ex2_tilt(poisson_ex2, geometric_ex2):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return nonsep.solve_tilt(poisson_ex2, geometric_ex2,
                                 theta0=EX2["theta"], b=0.0)

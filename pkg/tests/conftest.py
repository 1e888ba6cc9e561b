import numpy as np
import pytest

from iabnet.analytic import Omega, PathlossLaw, association_probability
from iabnet.config import NetworkConfig
from iabnet.geometry import Rect


@pytest.fixture(scope="session")
def table1() -> NetworkConfig:
    return NetworkConfig()


@pytest.fixture(scope="session")
def law(table1) -> PathlossLaw:
    return PathlossLaw.from_config(table1)


@pytest.fixture(scope="session")
def omega(table1) -> Omega:
    return Omega.from_config(table1)


@pytest.fixture(scope="session")
def assoc(law, omega):
    a_m = association_probability(law, omega, "m")
    a_s = association_probability(law, omega, "s")
    return a_m, a_s


@pytest.fixture(scope="session")
def window() -> Rect:
    return Rect.square(2000.0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)

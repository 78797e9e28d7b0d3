import numpy as np
import pytest

from bdbridge import LBDIParams, SISParams, lbdi_model, sis_model
from bdbridge.sampler import RngStream


@pytest.fixture
def rng():
    return RngStream(20240817)


@pytest.fixture(scope="session")
def lbdi_table():
    """The standard linear-immigration test setting."""
    return LBDIParams(lam=0.8, mu=0.6, nu=1.2)


@pytest.fixture(scope="session")
def lbdi_table_model(lbdi_table):
    return lbdi_model(lbdi_table)


@pytest.fixture(scope="session")
def sis_table():
    return SISParams(n0=30, beta=0.003, gamma=1.0)


@pytest.fixture(scope="session")
def sis_table_model(sis_table):
    return sis_model(sis_table)


@pytest.fixture(scope="session")
def zero_model():
    from bdbridge import BirthDeathModel

    return BirthDeathModel(lambda y: 0.0 * np.asarray(y),
                           lambda y: 0.0 * np.asarray(y), name="frozen")

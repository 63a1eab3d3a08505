import numpy as np
import pytest

from beamblocks.config import SolverConfig
from beamblocks.problem import make_workspace


@pytest.fixture(scope="session")
def ws_desk():
    """The small d=1 workspace most tests share (cheap to build, nontrivial)."""
    cfg = SolverConfig(d=1, m=1.0, omega=1.234, eps=1e-3, J_max=12, N_max=3,
                       nonlinearity="z4", forcing="1:1:1.0",
                       delta=0.0316227766016838, zeta=3.5)
    return make_workspace(cfg)


@pytest.fixture(scope="session")
def ws_d2():
    cfg = SolverConfig(d=2, m=1.0, omega=1.234, eps=1e-3, J_max=6, N_max=3,
                       nonlinearity="z4", forcing="1:1,0:1.0",
                       delta=0.0316227766016838, zeta=3.5)
    return make_workspace(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

import math
import os
from pathlib import Path

import numpy as np
import pytest

from emhd.energy import (
    IMParams,
    MechanicalParams,
    PMSMParams,
    build_im,
    build_pmsm,
    build_saturated_pmsm,
    build_synrm,
    reference_mech,
    reference_saturated_params,
)

GAMMA_D = 1.0 / 8.8e-3
GAMMA_Q = 1.0 / 7.7e-3
PHI_M = 0.155
CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "emhd", "configs")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mech():
    return reference_mech()


@pytest.fixture
def pmsm(mech):
    return build_pmsm(PMSMParams(GAMMA_D, GAMMA_Q, GAMMA_D, PHI_M, mech))


@pytest.fixture
def synrm(mech):
    return build_synrm(20.0, 60.0, 20.0, mech)


@pytest.fixture
def im():
    return build_im(IMParams(5.0, 100.0, 100.0, 100.0, 100.0, MechanicalParams(J=0.01, n=2)))


@pytest.fixture
def saturated():
    return build_saturated_pmsm(reference_saturated_params())


def config_path(name):
    return Path(CONFIG_DIR, name).resolve()

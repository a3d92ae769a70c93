from __future__ import annotations

import math

import numpy as np
import pytest

from oamspdc.measurement import mes_state
from oamspdc.spectrum import ModeWindow, QuadratureSettings, default_crystal


@pytest.fixture(scope="session")
def crystal():
    return default_crystal()


@pytest.fixture(scope="session")
def window():
    return ModeWindow()


@pytest.fixture(scope="session")
def quad():
    return QuadratureSettings()


@pytest.fixture(scope="session")
def mes_rho():
    psi = mes_state()
    return np.outer(psi, psi.conj())


MES_PUMP = ((-2, math.sqrt(2.5)), (0, 1.0), (2, math.sqrt(2.5)))

import numpy as np
import pytest

from drivenprobe.limitcycle import DriveSpec
from drivenprobe.spectral import OhmicAlgebraic, SuperOhmicHardCutoff


@pytest.fixture
def ohmic():
    return OhmicAlgebraic(0.01, 100.0)


@pytest.fixture
def super_ohmic():
    return SuperOhmicHardCutoff(1e-3, 2.0)


@pytest.fixture
def drive():
    return DriveSpec(1.0, 0.1, 0.9)


@pytest.fixture
def undriven():
    return DriveSpec(1.0)


def rel(a, b):
    return np.max(np.abs(np.asarray(a) / np.asarray(b) - 1.0))

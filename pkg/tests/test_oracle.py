import warnings

import numpy as np
import pytest

from drivenprobe.limitcycle import DriveSpec
from drivenprobe.metrology import CovarianceMatrix
from drivenprobe.oracle import (
    RecurrenceWarning,
    discretize,
    energy,
    evolve_covariance,
    full_covariance_trajectory,
)
from drivenprobe.spectral import OhmicAlgebraic, SuperOhmicHardCutoff, dissipation_kernel_time


@pytest.mark.parametrize("grid", ["linear", "geometric"])
def test_discretisation_reproduces_counter_term(grid):
    m = OhmicAlgebraic(0.01, 10.0)
    bath = discretize(m, 4000, 2000.0, grid=grid, omega_min=1e-3)
    # sum g^2 / w^2 approximates (2/pi) int J/w = w_R^2 up to the truncated tail
    tail = 2 / np.pi * 0.02 * 10.0 * (np.pi / 2 - np.arctan(200.0))
    assert bath.counter_term() == pytest.approx(m.omega_r_squared() - tail, rel=2e-3)


def test_discrete_kernel_matches_continuum_before_recurrence():
    # linear bins resolve sin(w t) for t << 1 / bin width; compare with the band-limited continuum
    from scipy import integrate

    m = OhmicAlgebraic(0.05, 5.0)
    bath = discretize(m, 4000, 400.0, grid="linear")
    for t in (0.1, 0.4, 1.0, 3.0):
        ref = 2 / np.pi * integrate.quad(lambda w: float(m.j(w)), 0, 400.0, weight="sin", wvar=t, limit=500)[0]
        assert bath.dissipation_kernel(t) == pytest.approx(ref, rel=1e-3, abs=1e-5)
    # the continuum kernel itself is approached once the band limit is irrelevant
    assert bath.dissipation_kernel(1.0) == pytest.approx(dissipation_kernel_time(m, 1.0), abs=3e-3)


def test_super_ohmic_discretisation_stays_in_support():
    bath = discretize(SuperOhmicHardCutoff(1e-3, 2.0), 500, grid="linear")
    assert bath.frequencies.max() < 2.0


def test_uncoupled_probe_keeps_its_state():
    bath = discretize(OhmicAlgebraic(0.0, 10.0), 50, 50.0)
    s0 = CovarianceMatrix(0.7, 0.1, 0.9)
    tr = evolve_covariance(bath, DriveSpec(1.0), 0.3, [0.0, np.pi], probe=s0)
    # half a period of free rotation maps (x, p) -> (-x, -p)
    assert tr.xx == pytest.approx([0.7, 0.7]) and tr.pp == pytest.approx([0.9, 0.9])
    assert tr.xp == pytest.approx([0.1, 0.1])


def test_mode_and_lyapunov_paths_agree_small_bath():
    bath = discretize(OhmicAlgebraic(0.05, 10.0), 40, 40.0)
    d = DriveSpec(1.0, 0.2, 1.1)
    t = np.arange(6) * d.period / 4
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RecurrenceWarning)
        a = evolve_covariance(bath, d, 0.4, t, step=d.period / 800)
        b = evolve_covariance(bath, d, 0.4, t, method="lyapunov")
    for k in ("xx", "xp", "pp"):
        assert getattr(a, k) == pytest.approx(getattr(b, k), rel=1e-4, abs=1e-7)   # second-order splitting error


def test_closed_system_conserves_energy_without_drive():
    bath = discretize(OhmicAlgebraic(0.05, 10.0), 30, 40.0)
    d = DriveSpec(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RecurrenceWarning)
        S = full_covariance_trajectory(bath, d, 0.5, [0.0, 3.0, 9.0])
    e = [energy(bath, d, s) for s in S]
    assert e == pytest.approx([e[0]] * 3, rel=1e-8)


def test_recurrence_warning_and_grid_check():
    bath = discretize(OhmicAlgebraic(0.05, 10.0), 20, 20.0)
    with pytest.warns(RecurrenceWarning):
        evolve_covariance(bath, DriveSpec(1.0), 0.5, [100.0])
    d = DriveSpec(1.0, 0.1, 1.0)
    with pytest.raises(ValueError), warnings.catch_warnings():
        warnings.simplefilter("ignore", RecurrenceWarning)
        evolve_covariance(bath, d, 0.5, [0.5, 0.5 + 1e-4], step=d.period / 10)


def test_state_stays_physical_along_the_way():
    bath = discretize(OhmicAlgebraic(0.01, 100.0), 2000, 1000.0, grid="geometric", omega_min=0.002)
    tr = evolve_covariance(bath, DriveSpec(1.0), 0.1, np.linspace(0, 50, 11))
    assert np.all(tr.det >= 0.25 * (1 - 1e-9))

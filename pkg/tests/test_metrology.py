import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from drivenprobe.metrology import (
    CovarianceMatrix,
    NumericalInstabilityError,
    SensitivityCurve,
    UnphysicalStateError,
    fit_scaling_exponent,
    gaussian_fidelity,
    gaussian_qfi,
    gibbs_covariance,
    gibbs_qfi,
    qfi_temperature,
    snr_bound,
)


def covariance_from(n, r, phi, s=1.0):
    """Thermal occupation n, squeezing r at angle phi, scaled by s (x -> s x)."""
    c, si = np.cos(phi), np.sin(phi)
    R = np.array([[c, -si], [si, c]])
    D = np.diag([s * np.exp(-r), np.exp(r) / s])
    S = R @ D @ R.T
    return CovarianceMatrix.from_array((n + 0.5) * S @ S.T)


physical = st.builds(covariance_from, st.floats(0.0, 3.0), st.floats(0.0, 1.2), st.floats(0.0, np.pi),
                     st.floats(0.3, 3.0))


# --- independent oracle: density matrices in a truncated Fock basis -----------------
DIM = 70
_a = np.diag(np.sqrt(np.arange(1, DIM)), 1)
_X = (_a + _a.T) / np.sqrt(2)
_P = (_a - _a.T) / (1j * np.sqrt(2))


def density_matrix(sigma: CovarianceMatrix):
    """exp(-H) / Z with H quadratic, chosen so that the state has covariance sigma."""
    S = sigma.as_array()
    nu = np.sqrt(sigma.det)
    J = np.array([[0, 1], [-1, 0]])
    # symplectic diagonalisation: S = M diag(nu, nu) M^T with M symplectic
    M = linalg.sqrtm(S / nu).real
    beta = np.log((nu + 0.5) / (nu - 0.5))
    Hm = np.linalg.inv(M).T @ np.linalg.inv(M)          # H = beta/2 r^T Hm r
    H = 0.5 * beta * (Hm[0, 0] * _X @ _X + Hm[1, 1] * _P @ _P + Hm[0, 1] * (_X @ _P + _P @ _X))
    rho = linalg.expm(-(H - np.min(np.linalg.eigvalsh(H)) * np.eye(DIM)))
    return rho / np.trace(rho)


def fock_fidelity(s1, s2):
    r1 = density_matrix(s1)
    sq = linalg.sqrtm(r1)
    return np.trace(linalg.sqrtm(sq @ density_matrix(s2) @ sq)).real ** 2


def test_fock_oracle_reproduces_covariance():
    s = covariance_from(0.4, 0.3, 0.7)
    rho = density_matrix(s)
    assert np.trace(rho @ _X @ _X).real == pytest.approx(s.xx, rel=1e-8)
    assert np.trace(rho @ (_X @ _P + _P @ _X)).real / 2 == pytest.approx(s.xp, abs=1e-8)


@pytest.mark.parametrize("args", [((0.3, 0.2, 0.4), (0.5, 0.1, 1.0)), ((0.02, 0.0, 0.0), (0.2, 0.3, 2.0)),
                                  ((1.0, 0.4, 0.0), (0.8, 0.5, 0.3))])
def test_fidelity_matches_density_matrix_oracle(args):
    s1, s2 = covariance_from(*args[0]), covariance_from(*args[1])
    assert gaussian_fidelity(s1, s2) == pytest.approx(fock_fidelity(s1, s2), rel=1e-7)


def test_fidelity_of_thermal_states_closed_form():
    # same frequency: F = 1 / (sqrt((n1+1)(n2+1)) - sqrt(n1 n2))^2 ... as root fidelity squared
    n1, n2 = 0.3, 1.7
    root = 1.0 / (np.sqrt((n1 + 1) * (n2 + 1)) - np.sqrt(n1 * n2))
    assert gaussian_fidelity(covariance_from(n1, 0, 0), covariance_from(n2, 0, 0)) == pytest.approx(root**2)


@given(s=physical)
def test_self_fidelity_is_one(s):
    assert gaussian_fidelity(s, s) == pytest.approx(1.0, abs=1e-12)


@given(s1=physical, s2=physical)
def test_fidelity_symmetric_and_bounded(s1, s2):
    f = gaussian_fidelity(s1, s2)
    assert f == pytest.approx(gaussian_fidelity(s2, s1), rel=1e-12)
    assert 0 < f <= 1 + 1e-12


def test_as_printed_variant_fails_normalisation():
    s = covariance_from(1.0, 0.0, 0.0)
    assert gaussian_fidelity(s, s, "as-printed") != pytest.approx(1.0, abs=1e-3)
    assert gaussian_fidelity(s, s) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        gaussian_fidelity(s, s, "other")


def test_unphysical_rejected():
    bad = CovarianceMatrix(0.1, 0.0, 0.1)
    assert not bad.is_physical()
    with pytest.raises(UnphysicalStateError):
        gaussian_fidelity(bad, bad)
    with pytest.raises(UnphysicalStateError):
        CovarianceMatrix(0.1, 0.0, 0.1, check=True)


rates = st.builds(lambda m, sgn: m * sgn, st.floats(0.1, 1.0), st.sampled_from([-1.0, 1.0]))


@settings(max_examples=30, deadline=None)
@given(n=st.floats(0.05, 2.0), r=st.floats(0.0, 0.8), phi=st.floats(0, np.pi),
       dn=rates, dr=rates, dphi=rates)
def test_closed_form_qfi_matches_fidelity_curvature(n, r, phi, dn, dr, dphi):
    fam = lambda x: covariance_from(n + dn * x, r + dr * x, phi + dphi * x)
    h = 1e-6
    deriv = CovarianceMatrix.from_array((fam(h).as_array() - fam(-h).as_array()) / (2 * h))
    closed = gaussian_qfi(fam(0.0), deriv)
    numeric = qfi_temperature(lambda x: fam(x - 1.0), 1.0, h=2e-3)
    assert numeric == pytest.approx(closed, rel=1e-4, abs=1e-9)


def test_pure_state_qfi():
    # pure squeezed family: F = 4 (dr)^2 Var(generator) = 2 dr^2 for r -> r + x
    fam = lambda x: covariance_from(0.0, 0.3 + x, 0.0)
    h = 1e-6
    d = CovarianceMatrix.from_array((fam(h).as_array() - fam(-h).as_array()) / (2 * h))
    assert gaussian_qfi(fam(0.0), d) == pytest.approx(2.0, rel=1e-8)


@pytest.mark.parametrize("T", [0.05, 0.3, 2.0])
def test_gibbs_qfi_is_heat_capacity_over_T2(T):
    x = 1 / (2 * T)
    dc = x / T / np.sinh(x) ** 2        # d coth(x) / dT
    ds = CovarianceMatrix(dc / 2, 0.0, dc / 2)
    C = (x / np.sinh(x)) ** 2
    assert gibbs_qfi(1.0, T) == pytest.approx(C / T**2, rel=1e-12)
    # near-pure states lose digits in 1 - P^4
    assert gaussian_qfi(gibbs_covariance(1.0, T), ds) == pytest.approx(C / T**2, rel=1e-6)
    assert qfi_temperature(lambda t: gibbs_covariance(1.0, t), T) == pytest.approx(C / T**2, rel=1e-4)


def test_qfi_temperature_flags_negative_curvature():
    # the as-printed fidelity exceeds 1 at coinciding states with 4 det in (2, 6),
    # so its second difference has the wrong sign and must be rejected
    source = lambda t: gibbs_covariance(1.0, t)
    T = 1 / (2 * np.arctanh(0.5))        # coth = 2 -> 4 det = 4
    with pytest.raises(NumericalInstabilityError):
        qfi_temperature(source, T, variant="as-printed")


def test_snr_bound():
    assert snr_bound(4.0, 0.5, N=4) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        snr_bound(-1.0, 1.0)
    with pytest.raises(ValueError):
        snr_bound(1.0, 1.0, N=0)


@given(p=st.floats(0.5, 4.0), c=st.floats(1e-3, 1e3))
def test_fit_recovers_power_law(p, c):
    T = np.geomspace(1e-3, 1e-1, 20)
    slope, err = fit_scaling_exponent(SensitivityCurve(T, c * T**p), (1e-3, 1e-2))
    assert slope == pytest.approx(p, abs=1e-9)


def test_fit_needs_points_and_positive_values():
    T = np.geomspace(1e-3, 1e-1, 20)
    with pytest.raises(ValueError):
        fit_scaling_exponent(SensitivityCurve(T, T**2), (0.5, 0.6))
    with pytest.raises(ValueError):
        fit_scaling_exponent(SensitivityCurve(T, 0 * T), None)
    with pytest.raises(ValueError):
        SensitivityCurve(T[::-1], T)

"""Map a trapped impurity in a quasi-1D condensate onto the super-Ohmic probe model.

Inputs are SI; the probe model uses ``m_I = hbar = k_B = 1`` with the impurity
trap frequency ``omega_I`` as the frequency unit.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .limitcycle import DriveSpec
from .spectral import SuperOhmicHardCutoff

HBAR = 1.05457181765e-34        # J s
K_B = 1.38064900000e-23         # J / K
ATOMIC_MASS = 1.66053906660e-27  # kg

YB174_MASS = 173.938866 * ATOMIC_MASS
K39_MASS = 38.9637065 * ATOMIC_MASS

MU_EXPONENTS = {"thomas-fermi": 2.0 / 3.0, "as-printed": 1.5}


@dataclass(frozen=True)
class BecExperiment:
    m_impurity: float = YB174_MASS
    m_boson: float = K39_MASS
    n_bosons: float = 5000.0
    omega_impurity: float = 2 * np.pi * 375.0
    omega_boson: float = 2 * np.pi * 750.0
    g_ib: float = 0.55e-39
    g_b: float = 3.0e-39
    temperature: float = 1e-9
    #: modulation amplitude as a fraction of ``omega_impurity**2``
    upsilon: float = 0.2
    omega_d: float = 0.8 * 2 * np.pi * 375.0
    mu_exponent: str = "thomas-fermi"

    def __post_init__(self):
        for name in ("m_impurity", "m_boson", "n_bosons", "omega_impurity", "omega_boson",
                     "g_b", "temperature", "omega_d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.g_ib < 0 or self.upsilon < 0:
            raise ValueError("g_ib and upsilon must be nonnegative")
        if self.mu_exponent not in MU_EXPONENTS:
            raise ValueError(f"mu_exponent must be one of {sorted(MU_EXPONENTS)}")

    def with_coupling_exponent(self, sign: int) -> "BecExperiment":
        """Reinterpret both couplings' powers of ten as ``10^(sign*39)``."""
        f = 10.0 ** (78 * (sign > 0))
        return replace(self, g_ib=self.g_ib * f, g_b=self.g_b * f)


def chemical_potential(exp: BecExperiment) -> float:
    """Thomas-Fermi chemical potential of the condensate (J)."""
    base = 3.0 / (4.0 * np.sqrt(2.0)) * exp.g_b * exp.n_bosons * exp.omega_boson * np.sqrt(exp.m_boson)
    return float(base ** MU_EXPONENTS[exp.mu_exponent])


def thomas_fermi_radius(exp: BecExperiment, mu=None) -> float:
    if mu is None:
        mu = chemical_potential(exp)
    return float(np.sqrt(2.0 * mu / (exp.m_boson * exp.omega_boson**2)))


def gamma0_si(exp: BecExperiment) -> float:
    """``pi g_B / (w_B^4 r^3) (g_IB mu / (g_B hbar w_B))^2`` in kg s^2."""
    mu = chemical_potential(exp)
    r = thomas_fermi_radius(exp, mu)
    return float(np.pi * exp.g_b / (exp.omega_boson**4 * r**3)
                 * (exp.g_ib * mu / (exp.g_b * HBAR * exp.omega_boson)) ** 2)


def gamma0(exp: BecExperiment) -> float:
    """Dimensionless prefactor of ``J(w) = 2 gamma0 w^4`` in probe units."""
    return gamma0_si(exp) * exp.omega_impurity**2 / exp.m_impurity


def temperature_natural(exp: BecExperiment, T_kelvin=None):
    T = exp.temperature if T_kelvin is None else np.asarray(T_kelvin, dtype=float)
    return K_B * T / (HBAR * exp.omega_impurity)


def temperature_kelvin(exp: BecExperiment, T_natural):
    return np.asarray(T_natural, dtype=float) * HBAR * exp.omega_impurity / K_B


def to_probe_model(exp: BecExperiment):
    """``(SuperOhmicHardCutoff, DriveSpec, T)`` in probe units."""
    model = SuperOhmicHardCutoff(gamma0(exp), exp.omega_boson / exp.omega_impurity)
    drive = DriveSpec(1.0, exp.upsilon, exp.omega_d / exp.omega_impurity)
    return model, drive, float(temperature_natural(exp))


def from_probe_units(exp: BecExperiment, model: SuperOhmicHardCutoff, drive: DriveSpec, T: float) -> dict:
    """Inverse map of the frequency, drive and temperature scales back to SI."""
    w = exp.omega_impurity
    return dict(omega_boson=model.omega_b * w, omega_d=drive.omega_d * w,
                upsilon=drive.upsilon, temperature=float(temperature_kelvin(exp, T)),
                gamma0_si=model.gamma0 * exp.m_impurity / w**2)

"""Bath spectral densities and the kernels derived from them.

Natural units (m = hbar = k_B = 1) are used throughout.  Two baths are
supported: an Ohmic spectrum with algebraic (Drude) cutoff and a super-Ohmic
``omega**4`` spectrum with a hard cutoff, the latter describing an impurity
immersed in a trapped condensate.

The Laplace-transformed dissipation kernel is evaluated on the imaginary axis,
``chi_hat(omega) = chi_hat(s = i*omega + 0+)``, so that
``Im chi_hat(omega) = -J_tilde(omega)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate


class SpectralModel:
    """Common interface for bath spectral densities."""

    #: upper end of the support of J (``np.inf`` when unbounded)
    support: float = np.inf
    #: natural frequency scale of the bath (cutoff)
    cutoff: float = np.inf

    def j(self, omega):
        raise NotImplementedError

    def j_over_omega(self, omega):
        """``J(omega)/omega``, finite at ``omega = 0``."""
        raise NotImplementedError

    def chi_hat(self, omega):
        raise NotImplementedError

    def omega_r_squared(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class OhmicAlgebraic(SpectralModel):
    """``J(w) = 2 gamma w / (1 + (w/omega_c)**2)``."""

    gamma: float
    omega_c: float

    def __post_init__(self):
        if not (self.gamma >= 0 and self.omega_c > 0):
            raise ValueError(f"need gamma >= 0 and omega_c > 0, got {self}")

    @property
    def cutoff(self) -> float:
        return self.omega_c

    def j(self, omega):
        omega = np.asarray(omega, dtype=float)
        return 2.0 * self.gamma * omega / (1.0 + (omega / self.omega_c) ** 2)

    def j_over_omega(self, omega):
        omega = np.asarray(omega, dtype=float)
        return 2.0 * self.gamma / (1.0 + (omega / self.omega_c) ** 2)

    def chi_hat(self, omega):
        omega = np.asarray(omega, dtype=float)
        return 2.0 * self.gamma * self.omega_c**2 / (self.omega_c + 1j * omega)

    def omega_r_squared(self) -> float:
        return 2.0 * self.gamma * self.omega_c

    def chi_time(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, 2.0 * self.gamma * self.omega_c**2 * np.exp(-self.omega_c * np.abs(t)), 0.0)


@dataclass(frozen=True)
class SuperOhmicHardCutoff(SpectralModel):
    """``J(w) = 2 gamma0 w**4`` for ``w < omega_b`` and zero above."""

    gamma0: float
    omega_b: float

    def __post_init__(self):
        if not (self.gamma0 >= 0 and self.omega_b > 0):
            raise ValueError(f"need gamma0 >= 0 and omega_b > 0, got {self}")

    @property
    def support(self) -> float:
        return self.omega_b

    @property
    def cutoff(self) -> float:
        return self.omega_b

    def j(self, omega):
        omega = np.asarray(omega, dtype=float)
        return np.where(omega < self.omega_b, 2.0 * self.gamma0 * omega**4, 0.0)

    def j_over_omega(self, omega):
        omega = np.asarray(omega, dtype=float)
        return np.where(omega < self.omega_b, 2.0 * self.gamma0 * omega**3, 0.0)

    def chi_hat(self, omega):
        # Kramers-Kronig transform of J, continued to s = i*omega + 0+:
        #   Re = g0 wB^4/pi + (2 g0 w^2/pi) (wB^2 + w^2 log|(wB^2 - w^2)/w^2|)
        #   Im = -J_tilde(w)
        omega = np.asarray(omega, dtype=float)
        g0, wb = self.gamma0, self.omega_b
        w2 = omega**2
        with np.errstate(divide="ignore", invalid="ignore"):
            gap = np.maximum(np.abs(wb**2 - w2), np.finfo(float).tiny)
            log_term = np.where(w2 > 0, w2 * np.log(gap / np.where(w2 > 0, w2, 1.0)), 0.0)
        real = g0 * wb**4 / np.pi + 2.0 * g0 * w2 / np.pi * (wb**2 + log_term)
        return real - 1j * j_tilde(self, omega)

    def omega_r_squared(self) -> float:
        # neglected within the validity of the impurity model
        return 0.0


def _check_nonnegative(omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    return omega


def j_of_omega(model: SpectralModel, omega):
    return model.j(_check_nonnegative(omega))


def j_tilde(model: SpectralModel, omega):
    """Odd extension of ``J`` to negative frequencies."""
    omega = np.asarray(omega, dtype=float)
    return np.sign(omega) * model.j(np.abs(omega))


def chi_hat(model: SpectralModel, omega):
    return model.chi_hat(omega)


def omega_r_squared(model: SpectralModel) -> float:
    return model.omega_r_squared()


def _x_coth_x(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x**2 / 3.0, xs / np.tanh(xs))


def _x2_csch2_x(x):
    x = np.asarray(x, dtype=float)
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    # csch^2 x = 4 e^{-2x} / (1 - e^{-2x})^2 ; underflows gracefully to 0
    big = xs**2 * 4.0 * np.exp(-2.0 * xs) / np.expm1(-2.0 * xs) ** 2
    return np.where(small, 1.0 - x**2 / 3.0, big)


def _check_temperature(T):
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")


def noise_kernel_hat(model: SpectralModel, omega, T: float):
    """``(2/pi) J(w) coth(w / 2T)``, evaluated stably down to ``w = 0``."""
    _check_temperature(T)
    omega = np.asarray(omega, dtype=float)
    x = omega / (2.0 * T)
    return (2.0 / np.pi) * model.j_over_omega(omega) * 2.0 * T * _x_coth_x(x)


def noise_kernel_hat_dT(model: SpectralModel, omega, T: float):
    """Temperature derivative of :func:`noise_kernel_hat`.

    ``(2/pi) J(w) (w / 2T^2) csch^2(w / 2T)``, zero (not NaN) deep in the
    quantum regime ``w >> T``.
    """
    _check_temperature(T)
    omega = np.asarray(omega, dtype=float)
    x = omega / (2.0 * T)
    return (4.0 / np.pi) * model.j_over_omega(omega) * _x2_csch2_x(x)


def dissipation_kernel_time(model: SpectralModel, t):
    """``chi(t) = (2/pi) int_0^inf J(w) sin(w t) dw`` for ``t >= 0``.

    The Ohmic kernel is returned in closed form (its value at ``t = 0`` is the
    ``0+`` limit); other models are integrated numerically.
    """
    if hasattr(model, "chi_time"):
        return model.chi_time(t)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    upper = model.support
    for i, ti in enumerate(t):
        if ti == 0:
            out[i] = 0.0
            continue
        val, _ = integrate.quad(lambda w: float(model.j(w)), 0.0, upper, weight="sin", wvar=ti, limit=400)
        out[i] = 2.0 / np.pi * val
    return out if out.size > 1 else out[0]


def resonance_width(model: SpectralModel, omega0: float) -> float:
    """Weak-coupling amplitude damping rate ``J(w0) / (2 w0)``."""
    return float(model.j(omega0)) / (2.0 * omega0)


def renormalized_frequency(model: SpectralModel, omega0: float, iterations: int = 50) -> float:
    """Peak position of ``|g0_hat|``: solves ``w^2 = w0^2 + w_R^2 - Re chi_hat(w)``."""
    w = omega0
    base = omega0**2 + model.omega_r_squared()
    for _ in range(iterations):
        w2 = base - float(np.real(model.chi_hat(w)))
        if w2 <= 0:
            return omega0
        w_new = np.sqrt(w2)
        if abs(w_new - w) < 1e-15 * omega0:
            return w_new
        w = w_new
    return w

"""Heat exchanged with the sample and power injected by the drive in the limit cycle.

Sign convention: ``Q`` is the heat current *into the probe* from the sample,
so the cycle-averaged heating rate of the sample is ``-Q``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature
from .limitcycle import (
    DriveSpec,
    LimitCycleState,
    amplitude_series,
    amplitudes,
    default_harmonics,
    integration_breakpoints,
    populated_harmonics,
)
from .spectral import SpectralModel, j_tilde, noise_kernel_hat


@dataclass
class HeatResult:
    omega_d: float
    heat: dict
    input_power: float
    first_law_residual: float


def instantaneous_heat_current(state: LimitCycleState, t):
    """``dQ/dt = 1/2 d sigma_pp/dt + (w(t)^2 + w_R^2) sigma_xp``."""
    wr2 = state.model.omega_r_squared() if state.model is not None else 0.0
    return 0.5 * state.sigma_dt("pp", t) + (state.drive.omega_squared(t) + wr2) * state.sigma("xp", t)


def input_power(state: LimitCycleState, t):
    """``dW/dt = 1/2 (d w(t)^2 / dt) sigma_xx(t)``."""
    return 0.5 * state.drive.omega_squared_dt(t) * state.sigma("xx", t)


def cycle_averaged_input_power(state: LimitCycleState) -> float:
    """Cycle mean of :func:`input_power` from the Fourier coefficients (no time sampling)."""
    d = state.harmonic_amplitudes("xx")
    h = (d.size - 1) // 2
    total = 0.0 + 0.0j
    for l, bl in state.drive.b.items():
        if abs(l) <= h:
            total += 1j * l * state.drive.omega_d * bl * d[h - l]
    return float(0.5 * total.real)


def cycle_averaged_heat(model: SpectralModel, drive: DriveSpec, T: float, order=2, K=None,
                        rtol=1e-10, truncate=True) -> float:
    """``-(1/pi) int_0^inf sum_k k wd J~(w + k wd) |a_k|^2 J(w) coth(w/2T) dw``.

    The sum runs over the populated harmonics; ``J~`` is the odd extension of
    ``J`` so shifted frequencies below zero contribute with reversed sign.

    With ``truncate`` (and an integer ``order``) ``|a_k|^2`` is expanded in the
    drive strength and only terms up to ``v**order`` are kept, i.e. the heat
    current to that order in ``v``.  Otherwise the ``order``-iteration (or
    exact, ``order=None``) amplitudes are inserted as they are.
    """
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    if not drive.b:
        return 0.0
    if K is None:
        K = default_harmonics(order, drive)
    kp = populated_harmonics(order, K, drive)
    ks = np.arange(-kp, kp + 1)

    def squared(w):
        if truncate and order is not None:
            _, terms = amplitude_series(model, drive, w, order, K)
            terms = terms[:, K - kp:K + kp + 1]
            out = np.zeros(terms.shape[1:])
            for p in range(order + 1):
                for q in range(order + 1 - p):
                    out += (terms[p] * np.conj(terms[q])).real
            return out
        _, a = amplitudes(model, drive, w, order, K)
        return np.abs(a[K - kp:K + kp + 1]) ** 2

    def integrand(w):
        shifted = w[None, :] + ks[:, None] * drive.omega_d
        weight = ks[:, None] * drive.omega_d * j_tilde(model, shifted)
        # (1/pi) J coth = mu_hat / 2; keep each harmonic separate for the error control
        return -0.5 * weight * squared(w) * noise_kernel_hat(model, w, T)[None, :]

    pts, tail = integration_breakpoints(model, drive, K, T)
    res = quadrature.integrate(integrand, pts, rtol=rtol, tail=tail)
    return float(res.value.sum())


def heat_scan(model: SpectralModel, omega0: float, upsilon: float, omegas_d, T: float,
              orders=(2, 4), reference_order=None, rtol=1e-10):
    """Cycle-averaged heat current over a range of drive frequencies.

    For every ``omega_d`` the heat is returned at each requested amplitude
    order; the input power and first-law residual use ``reference_order``
    (exact amplitudes by default), for which both quantities are computed from
    the same amplitudes along independent routes.
    """
    from .limitcycle import covariance_coefficients

    out = []
    for wd in np.atleast_1d(omegas_d):
        drive = DriveSpec(omega0, upsilon, float(wd))
        heat = {n: cycle_averaged_heat(model, drive, T, n, rtol=rtol) for n in orders}
        state = covariance_coefficients(model, drive, T, order=reference_order, rtol=rtol,
                                        derivative=False)
        w = cycle_averaged_input_power(state)
        q = cycle_averaged_heat(model, drive, T, reference_order, rtol=rtol)
        resid = abs(w + q) / abs(w) if w != 0 else abs(q)
        heat["reference"] = q
        out.append(HeatResult(float(wd), heat, w, resid))
    return out

"""Thermometric figures of merit for single-mode Gaussian probe states.

Covariances follow the convention ``sigma_xx = <x^2>``, ``sigma_xp =
<{x,p}>/2``, so the vacuum has ``det = 1/4``.
"""
from __future__ import annotations

from dataclasses import InitVar, dataclass, field

import numpy as np
from scipy import stats

PHYSICAL_SLACK = 1e-9


class UnphysicalStateError(ValueError):
    """Covariance matrix violates the uncertainty relation."""


class NumericalInstabilityError(ArithmeticError):
    """A finite-difference estimate is dominated by rounding."""


@dataclass(frozen=True)
class CovarianceMatrix:
    xx: float
    xp: float
    pp: float
    check: InitVar[bool] = False

    def __post_init__(self, check):
        if check:
            require_physical(self)

    @property
    def det(self) -> float:
        return self.xx * self.pp - self.xp**2

    def as_array(self) -> np.ndarray:
        return np.array([[self.xx, self.xp], [self.xp, self.pp]])

    @classmethod
    def from_array(cls, m, check=False):
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]), check)

    def is_physical(self, slack=PHYSICAL_SLACK) -> bool:
        return self.xx > 0 and self.pp > 0 and self.det >= 0.25 * (1.0 - slack)


def require_physical(sigma: CovarianceMatrix, slack=PHYSICAL_SLACK):
    if not sigma.is_physical(slack):
        raise UnphysicalStateError(f"unphysical covariance {sigma} (det = {sigma.det!r})")
    return sigma


def gibbs_covariance(omega0: float, T: float) -> CovarianceMatrix:
    """Thermal state of an isolated oscillator of unit mass."""
    c = 1.0 / np.tanh(omega0 / (2.0 * T))
    return CovarianceMatrix(c / (2.0 * omega0), 0.0, omega0 * c / 2.0)


def gibbs_qfi(omega0: float, T: float) -> float:
    """``C(T)/T^2`` with the oscillator heat capacity ``C = x^2 csch^2 x``, ``x = w0/2T``."""
    x = omega0 / (2.0 * T)
    return float((x / np.sinh(x)) ** 2 / T**2) if x < 350 else 0.0


FIDELITY_VARIANTS = ("corrected", "as-printed")


def gaussian_fidelity(s1: CovarianceMatrix, s2: CovarianceMatrix, variant="corrected") -> float:
    """Uhlmann fidelity of two zero-mean single-mode Gaussian states.

    ``F = 2 / (sqrt(kappa + lambda) - sqrt(lambda))`` with
    ``kappa = 4 det(S1 + S2)`` and ``lambda = (4 det S1 - 1)(4 det S2 - 1)``.
    ``variant="as-printed"`` uses ``sqrt(kappa + 1)`` in place of
    ``sqrt(kappa + lambda)``; it does not give ``F(rho, rho) = 1`` and exists
    only to reproduce that form for comparison.
    """
    require_physical(s1)
    require_physical(s2)
    kappa = 4.0 * ((s1.xx + s2.xx) * (s1.pp + s2.pp) - (s1.xp + s2.xp) ** 2)
    lam = max(4.0 * s1.det - 1.0, 0.0) * max(4.0 * s2.det - 1.0, 0.0)
    sl = np.sqrt(lam)
    if variant == "as-printed":
        return float(2.0 / (np.sqrt(kappa + 1.0) - sl))
    if variant != "corrected":
        raise ValueError(f"unknown fidelity variant {variant!r}")
    # sqrt(k + l) - sqrt(l) = k / (sqrt(k + l) + sqrt(l)) avoids cancellation
    return float(2.0 * (np.sqrt(kappa + lam) + sl) / kappa)


def gaussian_qfi(sigma: CovarianceMatrix, dsigma: CovarianceMatrix) -> float:
    """Closed-form QFI of a zero-mean single-mode Gaussian family.

    With purity ``P = 1/(2 sqrt(det S))``:
    ``F = Tr[(S^-1 S')^2] / (2 (1 + P^2)) + 2 P'^2 / (1 - P^4)``.
    The second term is dropped for a pure state, where it is 0/0 and
    ``P' = 0`` along any path of pure states.
    """
    S = sigma.as_array()
    dS = dsigma.as_array()
    M = np.linalg.solve(S, dS)
    det = sigma.det
    P = 0.5 / np.sqrt(det)
    ddet = np.trace(M) * det
    dP = -0.25 * ddet / det**1.5
    first = np.trace(M @ M) / (2.0 * (1.0 + P**2))
    one_minus = 1.0 - P**4
    second = 2.0 * dP**2 / one_minus if one_minus > 1e-14 else 0.0
    return float(max(first + second, 0.0))


def qfi_temperature(source, T: float, h=None, tol=1e-6, variant="corrected") -> float:
    """QFI from the curvature of the fidelity ``F(rho_T, rho_{T+tau})`` at ``tau = 0``.

    Symmetric second difference with step ``h`` (default ``1e-2 T``) and one
    Richardson level (``h`` and ``h/2``).  ``source`` maps a temperature to a
    :class:`CovarianceMatrix`.
    """
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    if h is None:
        h = 1e-2 * T
    s0 = source(T)

    def d2(step):
        fp = gaussian_fidelity(s0, source(T + step), variant)
        fm = gaussian_fidelity(s0, source(T - step), variant)
        return (fp + fm - 2.0) / step**2

    d_h, d_h2 = d2(h), d2(0.5 * h)
    curv = (4.0 * d_h2 - d_h) / 3.0
    qfi = -2.0 * curv
    scale = max(abs(d_h), abs(d_h2), 1e-300)
    if qfi < 0 and abs(qfi) > tol * scale:
        raise NumericalInstabilityError(
            f"negative QFI estimate {qfi:.3g} at T={T}; fidelity curvature not resolved with h={h:.3g}")
    return max(qfi, 0.0)


def snr_bound(qfi, T, N=1):
    """Cramer-Rao bound on the signal-to-noise ratio ``T / dT <= T sqrt(N F)``."""
    qfi = np.asarray(qfi, dtype=float)
    if np.any(qfi < 0):
        raise ValueError("QFI must be nonnegative")
    if np.any(np.asarray(N) < 1):
        raise ValueError("measurement count must be >= 1")
    return np.asarray(T, dtype=float) * np.sqrt(N * qfi)


def instantaneous_qfi(state, t) -> float:
    """QFI of the limit-cycle state at cycle time ``t`` (analytic dT)."""
    return gaussian_qfi(state.covariance(t), state.covariance_dT(t))


def cycle_qfi(state, policy="averaged", m=10, samples=128):
    """QFI over the drive cycle.

    ``policy="sampled"`` returns ``(min, max, mean)`` over ``m`` equispaced
    times; ``"averaged"`` returns the cycle mean of the instantaneous QFI,
    computed with ``samples`` periodic trapezoid nodes.
    """
    period = state.drive.period
    if policy == "sampled":
        if m < 2:
            raise ValueError("need at least two sample times")
        vals = np.array([instantaneous_qfi(state, t) for t in np.arange(m) * period / m])
        return float(vals.min()), float(vals.max()), float(vals.mean())
    if policy == "averaged":
        if not state.drive.b:
            return instantaneous_qfi(state, 0.0)
        return float(np.mean([instantaneous_qfi(state, t) for t in np.arange(samples) * period / samples]))
    raise ValueError(f"unknown time policy {policy!r}")


def responsiveness_x2(state) -> float:
    """``|d<x^2>/dT|^2 / Var(x^2)`` for the cycle-averaged position variance.

    For a zero-mean Gaussian state ``<x^4> = 3 <x^2>^2``, so the cycle-averaged
    variance of ``x^2`` is ``3 avg(s_xx^2) - avg(s_xx)^2``.
    """
    d = state.harmonic_amplitudes("xx")
    dd = state.harmonic_amplitudes("xx", derivative=True)
    h = (d.size - 1) // 2
    mean = d[h].real
    mean_sq = np.sum(np.abs(d) ** 2)
    return float(dd[h].real ** 2 / (3.0 * mean_sq - mean**2))


@dataclass
class SensitivityCurve:
    T: np.ndarray
    values: np.ndarray
    kind: str = "qfi"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.T.shape != self.values.shape:
            raise ValueError("T and values must have the same shape")
        if np.any(np.diff(self.T) <= 0):
            raise ValueError("temperatures must be strictly increasing")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("values must be finite and nonnegative")


def fit_scaling_exponent(curve: SensitivityCurve, t_range=None):
    """Least-squares slope (and its standard error) of ``log value`` vs ``log T``."""
    T, v = curve.T, curve.values
    if t_range is not None:
        lo, hi = t_range
        sel = (T >= lo * (1 - 1e-12)) & (T <= hi * (1 + 1e-12))
        T, v = T[sel], v[sel]
    if T.size < 5:
        raise ValueError(f"need at least 5 points in range, got {T.size}")
    if np.any(v <= 0):
        raise ValueError("scaling fit needs strictly positive values")
    fit = stats.linregress(np.log(T), np.log(v))
    return float(fit.slope), float(fit.stderr)

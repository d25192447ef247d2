"""Stability of the damped Mathieu oscillator ``x'' + gamma x' + (w0^2 + v cos(wd t)) x = 0``.

With ``t~ = wd t / 2`` and ``x = exp(-gamma~ t~ / 2) y`` the equation becomes

    y'' + (w0~^2 - gamma~^2/4 + 2 v~ cos 2t~) y = 0,
    w0~^2 = 4 w0^2 / wd^2,  v~ = 2 v / wd^2,  gamma~ = 2 gamma / wd,

whose monodromy over the period ``pi`` has unit determinant.  With
``cos(pi nu) = tr(M)/2`` the solution grows iff ``Im nu > gamma~/2``.  A sine
drive differs from the cosine form by a time shift and has the same stability.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

TRACE_TOL = 1e-9
MARGIN_TOL = 1e-9


@dataclass(frozen=True)
class MathieuPoint:
    omega0: float
    gamma: float
    upsilon: float
    omega_d: float

    def __post_init__(self):
        if not self.omega_d > 0:
            raise ValueError("omega_d must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def omega0_tilde_sq(self) -> float:
        return 4.0 * self.omega0**2 / self.omega_d**2

    @property
    def upsilon_tilde(self) -> float:
        return 2.0 * self.upsilon / self.omega_d**2

    @property
    def gamma_tilde(self) -> float:
        return 2.0 * self.gamma / self.omega_d


def monodromy(a, q, rtol=1e-10, atol=1e-10):
    """Monodromy matrices of ``y'' + (a + 2 q cos 2t) y = 0`` over ``[0, pi]``.

    ``a`` and ``q`` are broadcast to a common shape; all systems are integrated
    together.  Returns an array of shape ``a.shape + (2, 2)``.
    """
    a, q = np.broadcast_arrays(np.asarray(a, float), np.asarray(q, float))
    shape = a.shape
    a, q = a.ravel(), q.ravel()
    M = a.size
    y0 = np.zeros((4, M))
    y0[0] = 1.0   # first column: y(0)=1, y'(0)=0
    y0[3] = 1.0   # second column: y(0)=0, y'(0)=1

    def rhs(t, y):
        y = y.reshape(4, M)
        p = a + 2.0 * q * np.cos(2.0 * t)
        return np.stack([y[1], -p * y[0], y[3], -p * y[2]]).ravel()

    sol = solve_ivp(rhs, (0.0, np.pi), y0.ravel(), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"Mathieu integration failed: {sol.message}")
    yf = sol.y[:, -1].reshape(4, M)
    out = np.empty((M, 2, 2))
    out[:, 0, 0], out[:, 1, 0] = yf[0], yf[1]
    out[:, 0, 1], out[:, 1, 1] = yf[2], yf[3]
    return out.reshape(shape + (2, 2))


def _reduced(point: MathieuPoint):
    return point.omega0_tilde_sq - point.gamma_tilde**2 / 4.0, point.upsilon_tilde


def _growth_rate(half_trace):
    """``Im nu`` from ``tr(M)/2``; traces within ``TRACE_TOL`` of the band edge count as bounded."""
    h = np.abs(half_trace)
    return np.where(h > 1.0 + TRACE_TOL, np.arccosh(np.maximum(h, 1.0)) / np.pi, 0.0)


def characteristic_exponent(point: MathieuPoint) -> complex:
    """Characteristic exponent ``nu`` with ``Im nu >= 0``.

    ``nu`` is defined modulo even integers and sign; the representative whose
    real part lies closest to ``sqrt(a)`` (the unmodulated value) is returned.
    """
    a, q = _reduced(point)
    m = monodromy(a, q)
    half = 0.5 * np.trace(m)
    im = float(_growth_rate(half))
    if im > 0:
        re = 0.0 if half > 0 else 1.0
    else:
        re = float(np.arccos(np.clip(half, -1.0, 1.0)) / np.pi)
    target = np.sqrt(max(a, 0.0))
    cands = [s * re + 2 * k for s in (1, -1) for k in range(int(target // 2) - 1, int(target // 2) + 3)]
    re = min(cands, key=lambda c: abs(c - target))
    return complex(re, im)


def stability_margin(point: MathieuPoint) -> float:
    """``Im nu - gamma~/2``: negative means decaying solutions."""
    return characteristic_exponent(point).imag - point.gamma_tilde / 2.0


def classify(point: MathieuPoint) -> str:
    m = stability_margin(point)
    if m < -MARGIN_TOL:
        return "stable"
    if m > MARGIN_TOL:
        return "unstable"
    return "marginal"


def is_stable(point: MathieuPoint) -> bool:
    return classify(point) == "stable"


def critical_amplitude(omega0, gamma, omega_d, upsilon_max, tol=1e-8):
    """Smallest ``v`` in ``(0, upsilon_max]`` at which the point turns unstable (bisection).

    Returns ``None`` if the point is stable up to ``upsilon_max``.
    """
    def unstable(v):
        return classify(MathieuPoint(omega0, gamma, v, omega_d)) == "unstable"

    if not unstable(upsilon_max):
        return None
    lo, hi = 0.0, upsilon_max
    while hi - lo > tol * upsilon_max:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if unstable(mid) else (mid, hi)
    return hi


@dataclass
class StabilityChart:
    omega_d: np.ndarray
    upsilon: np.ndarray
    gamma: float
    omega0: float
    margin: np.ndarray          # shape (len(upsilon), len(omega_d))

    @property
    def unstable(self) -> np.ndarray:
        return self.margin > MARGIN_TOL


def stability_chart(omega_d, upsilon, gamma, omega0=1.0, chunk=20000) -> StabilityChart:
    """Stability margins on the grid ``upsilon x omega_d``."""
    wd = np.asarray(omega_d, float)
    ups = np.asarray(upsilon, float)
    if np.any(wd <= 0) or np.any(ups < 0):
        raise ValueError("need omega_d > 0 and upsilon >= 0")
    W, U = np.meshgrid(wd, ups)
    a = 4.0 * omega0**2 / W**2 - (gamma / W) ** 2
    q = 2.0 * U / W**2
    gt2 = gamma / W
    flat_a, flat_q = a.ravel(), q.ravel()
    half = np.empty(flat_a.size)
    for s in range(0, flat_a.size, chunk):
        m = monodromy(flat_a[s:s + chunk], flat_q[s:s + chunk])
        half[s:s + chunk] = 0.5 * (m[:, 0, 0] + m[:, 1, 1])
    margin = _growth_rate(half).reshape(a.shape) - gt2
    return StabilityChart(wd, ups, gamma, omega0, margin)


def tongue_tip(chart: StabilityChart, n: int, max_upsilon=None):
    """Extrapolate the centre of the ``n``-th instability tongue to ``v -> 0``.

    Rows are restricted to drive frequencies with ``2 w0 / wd`` within
    ``n +- 1/2``; the centroid of the unstable cells in each row is fitted by
    a quadratic in ``v``.  Returns ``(omega_d_tip, lowest_unstable_v)`` or
    ``(None, None)`` if the tongue is not resolved.
    """
    wd = chart.omega_d
    sel = (2 * chart.omega0 / wd > n - 0.5) & (2 * chart.omega0 / wd < n + 0.5)
    rows, cents = [], []
    for i, v in enumerate(chart.upsilon):
        if max_upsilon is not None and v > max_upsilon:
            break
        mask = chart.unstable[i] & sel
        if mask.any():
            rows.append(v)
            cents.append(wd[mask].mean())
    if not rows:
        return None, None
    rows, cents = np.array(rows), np.array(cents)
    if rows.size >= 3:
        tip = float(np.polyval(np.polyfit(rows, cents, 2), 0.0))
    else:
        tip = float(cents[0])
    return tip, float(rows[0])

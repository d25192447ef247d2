"""Floquet amplitudes and limit-cycle covariances of a parametrically driven probe.

The probe frequency is modulated as ``w(t)^2 = w0^2 + sum_l b_l exp(i l wd t)``;
for the sinusoidal drive ``w0^2 + v sin(wd t)`` only ``b_{+-1} = -+ i v/2`` are
nonzero.  The periodic Green's function is expanded as

    g(t, t') = (1/2pi) sum_k int a_k(w) exp(i w (t-t')) exp(i k wd t) dw

and the amplitudes obey ``g0^-1(w + k wd) a_k + sum_l b_l a_{k-l} = delta_k0``.
This linear system is solved either by ``n`` fixed-point iterations (the
perturbative order-``n`` amplitudes) or exactly on a truncated harmonic block
(``order=None``).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from .metrology import CovarianceMatrix
from .spectral import (
    SpectralModel,
    noise_kernel_hat,
    noise_kernel_hat_dT,
    renormalized_frequency,
    resonance_width,
)


@dataclass(frozen=True)
class DriveSpec:
    """Sinusoidal (or general finite Fourier) modulation of the squared trap frequency."""

    omega0: float
    upsilon: float = 0.0
    omega_d: float = 1.0
    #: optional explicit Fourier coefficients ``{l: b_l}``; overrides the sinusoid
    coefficients: dict | None = None

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if not self.omega_d > 0:
            raise ValueError(f"omega_d must be positive, got {self.omega_d}")
        if self.upsilon < 0:
            raise ValueError(f"upsilon must be nonnegative, got {self.upsilon}")
        if self.coefficients is not None:
            for l, b in self.coefficients.items():
                if l == 0:
                    raise ValueError("the static part belongs in omega0, not b_0")
                other = self.coefficients.get(-l, 0.0)
                if abs(np.conj(b) - other) > 1e-14 * max(1.0, abs(b)):
                    raise ValueError("b_{-l} must equal conj(b_l) for a real modulation")

    @property
    def b(self) -> dict:
        if self.coefficients is not None:
            return {int(l): complex(v) for l, v in self.coefficients.items() if v != 0}
        if self.upsilon == 0:
            return {}
        return {1: -0.5j * self.upsilon, -1: 0.5j * self.upsilon}

    @property
    def max_harmonic(self) -> int:
        return max((abs(l) for l in self.b), default=0)

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega_d

    def omega_squared(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.omega0**2, dtype=complex)
        for l, bl in self.b.items():
            out = out + bl * np.exp(1j * l * self.omega_d * t)
        return out.real

    def omega_squared_dt(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for l, bl in self.b.items():
            out = out + 1j * l * self.omega_d * bl * np.exp(1j * l * self.omega_d * t)
        return out.real


def g0_hat(model: SpectralModel, drive: DriveSpec, omega):
    """Undriven response ``[w0^2 + wR^2 - w^2 - chi_hat(w)]^-1``."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 / (drive.omega0**2 + model.omega_r_squared() - omega**2 - model.chi_hat(omega))


def default_harmonics(order, drive: DriveSpec) -> int:
    if order is None:
        return 8 if drive.b else 0
    return 2 * order


def populated_harmonics(order, K, drive: DriveSpec) -> int:
    """Largest |k| that can be nonzero after ``order`` iterations within cutoff ``K``."""
    if order is None:
        return K if drive.b else 0
    return min(K, order * drive.max_harmonic)


def amplitudes(model: SpectralModel, drive: DriveSpec, omega, order=2, K=None):
    """Floquet amplitudes ``a_k(w)`` for ``k = -K..K``.

    Returns ``(ks, a)`` with ``a`` of shape ``(2K+1, len(omega))``.  ``order``
    is the number of fixed-point iterations; ``None`` solves the truncated
    system exactly.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if K is None:
        K = default_harmonics(order, drive)
    ks = np.arange(-K, K + 1)
    shifted = omega[None, :] + ks[:, None] * drive.omega_d
    g0 = g0_hat(model, drive, shifted)
    b = {l: v for l, v in drive.b.items() if abs(l) <= 2 * K}
    a = np.zeros_like(g0)
    a[K] = g0[K]
    if not b:
        return ks, a
    if order is None:
        h = ks.size
        mat = np.zeros((omega.size, h, h), dtype=complex)
        idx = np.arange(h)
        mat[:, idx, idx] = (1.0 / g0).T
        for l, bl in b.items():
            rows = idx[(idx - l >= 0) & (idx - l < h)]
            mat[:, rows, rows - l] = bl
        rhs = np.zeros((omega.size, h, 1), dtype=complex)
        rhs[:, K, 0] = 1.0
        return ks, np.linalg.solve(mat, rhs)[..., 0].T
    for _ in range(order):
        conv = np.zeros_like(a)
        for l, bl in b.items():
            # conv_k += b_l a_{k-l}
            if l > 0:
                conv[l:] += bl * a[:-l]
            else:
                conv[:l] += bl * a[-l:]
        src = -conv
        src[K] += 1.0
        a = g0 * src
    return ks, a


def amplitude_series(model: SpectralModel, drive: DriveSpec, omega, n: int, K=None):
    """Terms of the drive-strength expansion ``a_k = sum_p a_k[p]``, ``a_k[p] = O(v^p)``.

    Returns ``(ks, terms)`` with ``terms`` of shape ``(n+1, 2K+1, len(omega))``;
    ``terms[:m+1].sum(0)`` equals the ``m``-iteration amplitudes.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if K is None:
        K = default_harmonics(n, drive)
    ks = np.arange(-K, K + 1)
    g0 = g0_hat(model, drive, omega[None, :] + ks[:, None] * drive.omega_d)
    terms = np.zeros((n + 1,) + g0.shape, dtype=complex)
    terms[0, K] = g0[K]
    for p in range(1, n + 1):
        conv = np.zeros_like(g0)
        for l, bl in drive.b.items():
            if 0 < l <= 2 * K:
                conv[l:] += bl * terms[p - 1, :-l]
            elif -2 * K <= l < 0:
                conv[:l] += bl * terms[p - 1, -l:]
        terms[p] = -g0 * conv
    return ks, terms


@dataclass
class AmplitudeTable:
    """Amplitudes tabulated on a frequency grid (with optional quadrature weights)."""

    omega: np.ndarray
    harmonics: np.ndarray
    order: int | None
    values: np.ndarray
    drive: DriveSpec
    weights: np.ndarray | None = None
    truncated: bool = False


def _gk_grid(points):
    lo, hi = np.asarray(points[:-1]), np.asarray(points[1:])
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (mid[:, None] + half[:, None] * quadrature.NODES[None, :]).ravel()
    w = (half[:, None] * quadrature.KRONROD_WEIGHTS[None, :]).ravel()
    return x, w


def solve_amplitudes(model: SpectralModel, drive: DriveSpec, K=None, n=2, omega=None,
                     omega_max=None, symmetric=False, panel=0.25) -> AmplitudeTable:
    """Tabulate ``a_k^{(n)}`` on ``omega`` or on a Gauss-Kronrod grid.

    Without an explicit grid, panels of width ``panel`` cover ``[0, omega_max]``
    (``[-omega_max, omega_max]`` if ``symmetric``), refined around every
    shifted resonance so the table can be integrated with its weights.
    """
    if n is not None and n < 1:
        raise ValueError("iteration order must be >= 1")
    if K is None:
        K = default_harmonics(n, drive)
    truncated = n is not None and K < n * drive.max_harmonic
    if truncated:
        warnings.warn(f"harmonic cutoff K={K} clips harmonics generated at order {n}", stacklevel=2)
    weights = None
    if omega is None:
        if omega_max is None:
            omega_max = max(10.0 * drive.omega0, drive.omega0 + (K + 2) * drive.omega_d)
        pts = set(np.arange(0.0, omega_max + panel, panel).tolist())
        pts.update(resonance_points(model, drive, K, 0.0, omega_max))
        pts = np.array(sorted(p for p in pts if 0 <= p <= omega_max))
        if symmetric:
            pts = np.unique(np.concatenate([-pts, pts]))
        omega, weights = _gk_grid(pts)
    ks, vals = amplitudes(model, drive, omega, n, K)
    return AmplitudeTable(np.asarray(omega, float), ks, n, vals, drive, weights, truncated)


def resonance_points(model, drive, K, lower, upper, windows=(1.0, 10.0)):
    """Shifted resonances ``|+-w_eff - m wd|`` and their ``gamma_eff`` windows in (lower, upper)."""
    w_eff = renormalized_frequency(model, drive.omega0)
    width = max(resonance_width(model, drive.omega0), 1e-12 * drive.omega0)
    out = []
    for m in range(-(K + 1), K + 2):
        for s in (1.0, -1.0):
            r = s * w_eff - m * drive.omega_d
            out.append(r)
            for f in windows:
                out.extend([r - f * width, r + f * width])
    return [p for p in out if lower < p < upper]


def integration_breakpoints(model: SpectralModel, drive: DriveSpec, K: int, T: float | None = None):
    """Panel breakpoints on ``[0, upper]`` and whether an infinite tail follows."""
    finite_support = np.isfinite(model.support)
    if finite_support:
        upper = model.support
    else:
        upper = max(10.0 * model.cutoff, drive.omega0 + (K + 2) * drive.omega_d)
    pts = [0.0, upper]
    pts += resonance_points(model, drive, K, 0.0, upper)
    if np.isfinite(model.cutoff):
        pts.append(model.cutoff)
    if finite_support:
        # the Kramers-Kronig real part has log singularities where |w + k wd| = w_B
        for m in range(-(K + 1), K + 2):
            pts += [abs(model.support - m * drive.omega_d), abs(-model.support - m * drive.omega_d)]
    if T is not None:
        pts += [2.0 * T * f for f in (0.1, 0.5, 2.0, 8.0, 30.0)]
    lo = max(min(drive.omega0, drive.omega_d) * 1e-3, 1e-12)
    pts += list(np.geomspace(lo, upper, 24))
    pts = np.unique([p for p in pts if 0.0 <= p <= upper])
    return pts, not finite_support


KINDS = ("xx", "pp", "xp")


@dataclass
class LimitCycleState:
    """Coefficient matrices ``sigma^{ab}_{jk}`` of the limit-cycle covariances."""

    harmonics: np.ndarray
    coefficients: dict
    drive: DriveSpec
    T: float
    order: int | None = 2
    derivatives: dict | None = None
    model: SpectralModel | None = None
    quadrature_panels: int = 0
    _fourier: dict = field(default_factory=dict, repr=False)

    # -- Fourier bookkeeping -------------------------------------------------
    def fourier(self, kind: str, derivative=False) -> np.ndarray:
        """``c_m = sum_{j-k=m} s_jk`` for ``m = -(h-1)..h-1``."""
        key = (kind, derivative)
        if key not in self._fourier:
            src = self.derivatives if derivative else self.coefficients
            if src is None:
                raise ValueError("temperature derivatives were not computed for this state")
            s = src[kind]
            h = s.shape[0]
            self._fourier[key] = np.array([np.trace(s, offset=-m) for m in range(-(h - 1), h)])
        return self._fourier[key]

    def _series(self, kind, t, derivative=False, time_derivative=False):
        c = self.fourier(kind, derivative)
        h = (c.size + 1) // 2
        m = np.arange(-(h - 1), h)
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * self.drive.omega_d * np.multiply.outer(t, m))
        if time_derivative:
            phase = phase * (1j * self.drive.omega_d * m)
        z = phase @ c
        return z.imag if kind == "xp" else z.real

    def sigma(self, kind, t, derivative=False):
        return self._series(kind, t, derivative)

    def sigma_dt(self, kind, t):
        """Analytic time derivative of a covariance element."""
        return self._series(kind, t, time_derivative=True)

    def covariance(self, t) -> CovarianceMatrix:
        return CovarianceMatrix(float(self.sigma("xx", t)), float(self.sigma("xp", t)),
                                float(self.sigma("pp", t)))

    def covariance_dT(self, t) -> CovarianceMatrix:
        return CovarianceMatrix(float(self.sigma("xx", t, True)), float(self.sigma("xp", t, True)),
                                float(self.sigma("pp", t, True)), check=False)

    def harmonic_amplitudes(self, kind, derivative=False):
        """Fourier coefficients ``d_m`` of the real signal ``sigma(t) = sum d_m e^{i m wd t}``."""
        c = self.fourier(kind, derivative)
        if kind == "xp":
            return (c - np.conj(c[::-1])) / 2j
        return (c + np.conj(c[::-1])) / 2.0


def covariance_coefficients(model: SpectralModel, drive: DriveSpec, T: float, order=2, K=None,
                            rtol=1e-9, derivative=True) -> LimitCycleState:
    """Adaptive quadrature of the covariance coefficient integrals.

    ``s^xx_jk = 1/2 int a_j mu a_k*``, with extra weights ``(w+j wd)(w+k wd)``
    for ``pp`` and ``(w + k wd)`` for ``xp``.  With ``derivative`` the same
    integrals with ``d mu / dT`` are returned in ``state.derivatives``.
    """
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    if K is None:
        K = default_harmonics(order, drive)
    kp = populated_harmonics(order, K, drive)
    h = 2 * kp + 1
    nk = h * h
    kinds = list(KINDS) + ([f"d{k}" for k in KINDS] if derivative else [])

    def integrand(w):
        _, a = amplitudes(model, drive, w, order, K)
        a = a[K - kp:K + kp + 1]
        shift = w[None, :] + np.arange(-kp, kp + 1)[:, None] * drive.omega_d
        out = []
        weights = [noise_kernel_hat(model, w, T)]
        if derivative:
            weights.append(noise_kernel_hat_dT(model, w, T))
        for mu in weights:
            A = a * np.sqrt(0.5 * mu)[None, :]
            B = A * shift
            for X, Y in ((A, A), (B, B), (A, B)):
                z = (X[:, None, :] * np.conj(Y)[None, :, :]).reshape(nk, -1)
                out += [z.real, z.imag]
        return np.concatenate(out, axis=0)

    pts, tail = integration_breakpoints(model, drive, K, T)
    groups = [slice(2 * nk * i, 2 * nk * (i + 1)) for i in range(len(kinds))]
    res = quadrature.integrate(integrand, pts, groups=groups, rtol=rtol, tail=tail,
                               chunk=max(256, 200000 // max(nk, 1)))
    mats = {}
    for i, name in enumerate(kinds):
        re = res.value[2 * nk * i:2 * nk * i + nk]
        im = res.value[2 * nk * i + nk:2 * nk * (i + 1)]
        mats[name] = (re + 1j * im).reshape(h, h)
    coeffs = {k: mats[k] for k in KINDS}
    derivs = {k: mats["d" + k] for k in KINDS} if derivative else None
    return LimitCycleState(np.arange(-kp, kp + 1), coeffs, drive, T, order, derivs, model, res.panels)


def covariance_at_time(state: LimitCycleState, t) -> CovarianceMatrix:
    return state.covariance(t)


def time_averaged_covariance(state: LimitCycleState):
    """``(mean sigma_xx, mean sigma_pp, mean sigma_xx^2)`` over one drive period."""
    dxx = state.harmonic_amplitudes("xx")
    dpp = state.harmonic_amplitudes("pp")
    h = (dxx.size - 1) // 2
    return float(dxx[h].real), float(dpp[h].real), float(np.sum(np.abs(dxx) ** 2))


def _reference_response(omega, w_r, lam):
    # Laplace transform of exp(-lam t) sin(w_r t)/w_r on the imaginary axis
    return 1.0 / (w_r**2 + (1j * omega + lam) ** 2)


def greens_function(table: AmplitudeTable, t, t_prime):
    """Reconstruct ``g(t, t')`` from a symmetric weighted amplitude table.

    The ``1/w^2`` tail of ``a_0`` is removed with a damped-oscillator reference
    whose transform is known in closed form, so truncation of the frequency
    range only costs ``O(omega_max^-3)``.
    """
    if table.weights is None:
        raise ValueError("table needs quadrature weights; build it with solve_amplitudes(omega=None)")
    w, wt = table.omega, table.weights
    tau = np.subtract.outer(np.atleast_1d(t), np.atleast_1d(t_prime)).ravel()
    t_b = np.broadcast_to(np.atleast_1d(t)[:, None], (np.size(t), np.size(t_prime))).ravel()
    w_r, lam = table.drive.omega0, 1.0
    vals = table.values.copy()
    k0 = int(np.where(table.harmonics == 0)[0][0])
    vals[k0] = vals[k0] - _reference_response(w, w_r, lam)
    phase_w = np.exp(1j * np.outer(tau, w)) * wt[None, :]
    phase_k = np.exp(1j * np.outer(t_b, table.harmonics) * table.drive.omega_d)
    g = np.einsum("tw,kw,tk->t", phase_w, vals, phase_k) / (2.0 * np.pi)
    ref = np.where(tau >= 0, np.exp(-lam * np.clip(tau, 0, None)) * np.sin(w_r * tau) / w_r, 0.0)
    out = (g.real + ref).reshape(np.size(t), np.size(t_prime))
    return out if out.size > 1 else float(out[0, 0])

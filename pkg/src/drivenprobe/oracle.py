"""Brute-force reference: probe coupled to an explicit finite set of bath oscillators.

The closed probe+bath system is linear, so Gaussian covariances propagate
exactly.  Without driving the evolution is a rotation in the normal-mode
basis.  With driving, probe rows of the propagator are carried backwards in
time with a Strang splitting (exact free rotation, rank-one drive kick), which
costs ``O(N)`` per step and row.  A literal integration of the Lyapunov
equation ``dS/dt = A S + S A^T`` is provided for small baths as an independent
cross-check.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .limitcycle import DriveSpec
from .metrology import CovarianceMatrix
from .spectral import SpectralModel


class RecurrenceWarning(UserWarning):
    """Evolution time reaches the revival time of the discrete bath."""


@dataclass
class DiscretizedBath:
    frequencies: np.ndarray
    couplings: np.ndarray
    bin_widths: np.ndarray
    masses: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.frequencies <= 0):
            raise ValueError("bath frequencies must be positive")
        if self.masses is None:
            self.masses = np.ones_like(self.frequencies)

    @property
    def size(self) -> int:
        return self.frequencies.size

    def counter_term(self) -> float:
        """Frequency shift ``sum g^2 / (m w^2)`` that keeps the bare trap at ``w0``."""
        return float(np.sum(self.couplings**2 / (self.masses * self.frequencies**2)))

    def spectral_sum(self) -> float:
        """``(pi/2) sum g^2 / (m w)``, the mode-sum estimate of ``int J``."""
        return float(0.5 * np.pi * np.sum(self.couplings**2 / (self.masses * self.frequencies)))

    def dissipation_kernel(self, t):
        """``chi(t) = sum g^2 sin(w t) / (m w)`` for ``t >= 0``."""
        t = np.asarray(t, dtype=float)
        w = self.frequencies
        return np.sin(np.multiply.outer(t, w)) @ (self.couplings**2 / (self.masses * w))

    def recurrence_time(self, omega) -> float:
        """Revival time ``2 pi / dw`` of the mode spacing nearest ``omega``."""
        i = np.argmin(np.abs(self.frequencies - omega))
        return float(2.0 * np.pi / self.bin_widths[i])


def discretize(model: SpectralModel, N: int, omega_max: float | None = None, grid="linear",
               omega_min=None) -> DiscretizedBath:
    """Replace ``J`` by ``N`` modes with ``g^2 = (2/pi) m w J(w) dw``.

    ``grid="linear"`` uses bin midpoints on ``(0, omega_max]``;
    ``grid="geometric"`` spaces modes logarithmically between ``omega_min`` and
    ``omega_max``, which keeps the level spacing (and hence the revival time)
    proportional to the frequency.
    """
    if omega_max is None:
        omega_max = model.support if np.isfinite(model.support) else 10.0 * model.cutoff
    if grid == "linear":
        dw = omega_max / N
        w = (np.arange(N) + 0.5) * dw
        widths = np.full(N, dw)
    elif grid == "geometric":
        if omega_min is None:
            omega_min = omega_max * 1e-6
        edges = np.geomspace(omega_min, omega_max, N + 1)
        w = np.sqrt(edges[:-1] * edges[1:])
        widths = np.diff(edges)
    else:
        raise ValueError(f"unknown grid {grid!r}")
    g = np.sqrt(2.0 / np.pi * w * model.j(w) * widths)
    return DiscretizedBath(w, g, widths)


def _potential(bath: DiscretizedBath, omega0: float):
    n = bath.size + 1
    V = np.zeros((n, n))
    V[0, 0] = omega0**2 + bath.counter_term()
    V[0, 1:] = V[1:, 0] = -bath.couplings / np.sqrt(bath.masses)
    V[np.arange(1, n), np.arange(1, n)] = bath.frequencies**2
    return V


def thermal_bath_covariance(bath: DiscretizedBath, T: float):
    """Diagonal ``(x, p)`` variances of the bath modes in their Gibbs state (mass-weighted)."""
    c = 1.0 / np.tanh(bath.frequencies / (2.0 * T))
    return c / (2.0 * bath.frequencies), bath.frequencies * c / 2.0


def initial_covariance(bath, T, probe: CovarianceMatrix | None, omega0):
    """Product of a probe state and the thermal bath, as ``(Sxx, Sxp, Spp)`` diagonal/low-rank pieces."""
    if probe is None:
        probe = CovarianceMatrix(0.5 / omega0, 0.0, 0.5 * omega0)
    bx, bp = thermal_bath_covariance(bath, T)
    sxx = np.concatenate([[probe.xx], bx])
    spp = np.concatenate([[probe.pp], bp])
    sxp = np.zeros_like(sxx)
    sxp[0] = probe.xp
    return sxx, sxp, spp


@dataclass
class CovarianceTrajectory:
    times: np.ndarray
    xx: np.ndarray
    xp: np.ndarray
    pp: np.ndarray

    def at(self, i) -> CovarianceMatrix:
        return CovarianceMatrix(float(self.xx[i]), float(self.xp[i]), float(self.pp[i]))

    @property
    def det(self):
        return self.xx * self.pp - self.xp**2


def _check_recurrence(bath, omega0, t_final):
    t_rec = bath.recurrence_time(omega0)
    if t_final > 0.5 * t_rec:
        warnings.warn(f"t_final={t_final:.4g} exceeds half the bath revival time {t_rec:.4g}",
                      RecurrenceWarning, stacklevel=3)


def _modes(bath, omega0):
    w2, U = np.linalg.eigh(_potential(bath, omega0))
    if w2[0] <= 0:
        raise ValueError("discretised Hamiltonian is not bounded below")
    return np.sqrt(w2), U


def _mode_covariance(U, sxx, sxp, spp):
    # initial covariance is diagonal up to the probe x-p entry
    Sqq = (U.T * sxx) @ U
    Spp = (U.T * spp) @ U
    Sqp = (U.T * sxp) @ U
    return Sqq, Sqp, Spp


def _row_moments(alpha_x, beta_x, alpha_p, beta_p, S):
    Sqq, Sqp, Spp = S

    def cov(a1, b1, a2, b2):
        return (np.einsum("ri,ij,rj->r", a1, Sqq, a2) + np.einsum("ri,ij,rj->r", a1, Sqp, b2)
                + np.einsum("ri,ji,rj->r", b1, Sqp, a2) + np.einsum("ri,ij,rj->r", b1, Spp, b2))

    return cov(alpha_x, beta_x, alpha_x, beta_x), cov(alpha_x, beta_x, alpha_p, beta_p), \
        cov(alpha_p, beta_p, alpha_p, beta_p)


def evolve_covariance(bath: DiscretizedBath, drive: DriveSpec, T: float, times, probe=None,
                      step=None, method="modes"):
    """Probe covariances at ``times`` starting from probe (x) thermal bath at ``t = 0``.

    ``method="modes"``: exact normal-mode rotation, with the drive applied by
    Strang splitting of step ``step`` (default ``period/400``).
    ``method="lyapunov"``: adaptive integration of the full covariance ODE;
    only sensible for small baths.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("sample times must be nonnegative")
    _check_recurrence(bath, drive.omega0, times.max())
    sxx, sxp, spp = initial_covariance(bath, T, probe, drive.omega0)
    if method == "lyapunov":
        return _evolve_lyapunov(bath, drive, times, sxx, sxp, spp)
    if method != "modes":
        raise ValueError(f"unknown method {method!r}")
    Om, U = _modes(bath, drive.omega0)
    u = U[0]
    S = _mode_covariance(U, sxx, sxp, spp)
    if not drive.b:
        c, s = np.cos(np.outer(times, Om)), np.sin(np.outer(times, Om))
        # x(t) = sum_i u_i (cos Q_i + sin/Om Pi_i), p(t) = sum_i u_i (-Om sin Q_i + cos Pi_i)
        ax, bx = u * c, u * s / Om
        ap, bp = -u * Om * s, u * c
        xx, xp, pp = _row_moments(ax, bx, ap, bp, S)
        return CovarianceTrajectory(times, xx, xp, pp)
    ax, bx, ap, bp = _adjoint_rows(Om, u, drive, times, step)
    xx, xp, pp = _row_moments(ax, bx, ap, bp, S)
    return CovarianceTrajectory(times, xx, xp, pp)


def _adjoint_rows(Om, u, drive, times, step=None):
    """Rows ``(alpha, beta)`` with ``x(t) = alpha.Q(0) + beta.Pi(0)`` (and likewise ``p``)."""
    if step is None:
        step = drive.period / 400.0
    nsteps = int(np.ceil(times.max() / step))
    h = times.max() / max(nsteps, 1)
    grid_index = np.rint(times / h).astype(int)
    if np.any(np.abs(grid_index * h - times) > 1e-9 * max(1.0, times.max())):
        raise ValueError("sample times must lie on the integration grid; adjust step")
    nrow = 2 * times.size
    alpha = np.zeros((nrow, Om.size))
    beta = np.zeros((nrow, Om.size))
    active = np.zeros(nrow, dtype=bool)
    ch, sh = np.cos(0.5 * h * Om), np.sin(0.5 * h * Om)

    def rotate_back(a, b):
        # transpose of the free half-step acting on a row functional
        return a * ch - b * Om * sh, a * sh / Om + b * ch

    def activate(k):
        for i in np.where(grid_index == k)[0]:
            alpha[2 * i], beta[2 * i] = u, 0.0
            alpha[2 * i + 1], beta[2 * i + 1] = 0.0, u
            active[2 * i] = active[2 * i + 1] = True

    activate(nsteps)
    for k in range(nsteps, 0, -1):
        t_mid = (k - 0.5) * h
        kick = h * (drive.omega_squared(t_mid) - drive.omega0**2)
        a, b = rotate_back(alpha[active], beta[active])
        a = a - kick * np.outer(b @ u, u)
        a, b = rotate_back(a, b)
        alpha[active], beta[active] = a, b
        activate(k - 1)
    return alpha[0::2], beta[0::2], alpha[1::2], beta[1::2]


def _drift(bath, drive, t):
    V = _potential(bath, drive.omega0)
    V[0, 0] += drive.omega_squared(t) - drive.omega0**2
    n = V.shape[0]
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -V
    return A


def _lyapunov_solve(bath, drive, times, sxx, sxp, spp, rtol=1e-10, atol=1e-12):
    """Full covariances ``S(t)`` from ``dS/dt = A S + S A^T``; shape ``(len(times), 2n, 2n)``."""
    n = bath.size + 1
    S0 = np.zeros((2 * n, 2 * n))
    S0[:n, :n] = np.diag(sxx)
    S0[n:, n:] = np.diag(spp)
    S0[:n, n:] = S0[n:, :n] = np.diag(sxp)

    def rhs(t, y):
        S = y.reshape(2 * n, 2 * n)
        S = 0.5 * (S + S.T)
        A = _drift(bath, drive, t)
        return (A @ S + S @ A.T).ravel()

    sol = solve_ivp(rhs, (0.0, times.max()), S0.ravel(), t_eval=times, method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"covariance integration failed: {sol.message}")
    return sol.y.T.reshape(-1, 2 * n, 2 * n)


def _evolve_lyapunov(bath, drive, times, sxx, sxp, spp):
    S = _lyapunov_solve(bath, drive, times, sxx, sxp, spp)
    n = bath.size + 1
    return CovarianceTrajectory(times, S[:, 0, 0], 0.5 * (S[:, 0, n] + S[:, n, 0]), S[:, n, n])


def energy(bath, drive, S, t=0.0):
    """``<H> = tr(H S)/2`` of the closed system for a full covariance ``S``."""
    V = _potential(bath, drive.omega0)
    V[0, 0] += drive.omega_squared(t) - drive.omega0**2
    n = V.shape[0]
    return 0.5 * (np.trace(V @ S[:n, :n]) + np.trace(S[n:, n:]))


def full_covariance_trajectory(bath, drive, T, times, probe=None):
    """Full ``(2N+2)`` covariances from the Lyapunov ODE (small baths only)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    return _lyapunov_solve(bath, drive, times, *initial_covariance(bath, T, probe, drive.omega0))


def impulse_response(bath: DiscretizedBath, drive: DriveSpec, t, t_prime, step=None):
    """``g(t, t') = d x(t) / d p(t')`` of the discretised system (zero for ``t < t'``)."""
    if t < t_prime:
        return 0.0
    Om, U = _modes(bath, drive.omega0)
    u = U[0]
    if not drive.b:
        tau = t - t_prime
        return float(np.sum(u**2 * np.sin(Om * tau) / Om))
    # shift the drive so the kick at t' becomes time zero
    shifted = DriveSpec(drive.omega0, 0.0, drive.omega_d,
                        coefficients={l: b * np.exp(1j * l * drive.omega_d * t_prime)
                                      for l, b in drive.b.items()})
    ax, bx, _, _ = _adjoint_rows(Om, u, shifted, np.array([t - t_prime]), step)
    return float(bx[0] @ u)

"""Fourier (x) by sine (y) pseudo-spectral solver of the vorticity equation.

``omega = sum w[k1, k2] exp(2 pi i k1 x) sin(pi k2 y)`` with ``k2 = 1..M``.
The vorticity vanishes on the walls by construction (free slip), the
stream function ``psi = omega / lambda`` also vanishes there, so the velocity
``(d psi/dy, -d psi/dx)`` is divergence free with zero wall-normal component.
Sine quantities live on the interior grid ``y_j = j/(M+1)``, ``j = 1..M``
(DST-I), cosine quantities are evaluated with a DCT-I on the grid including
the walls.  Products are dealiased with the 2/3 rule in both directions,
which makes the truncated system conserve K and E exactly.
"""
from dataclasses import dataclass, replace

import numpy as np
from scipy import fft

from .kh_setup import initial_vorticity


@dataclass
class SpectralState:
    """Modal vorticity (rfft half spectrum in x) and SBDF2 history."""

    w: np.ndarray  # (N//2+1, M) complex
    N: int
    M: int
    nu: float
    dt: float
    step: int = 0
    w_prev: np.ndarray = None
    n_prev: np.ndarray = None  # nonlinear term of w_prev
    truncation_error: float = 0.0

    @property
    def t(self):
        return self.step * self.dt


class _Grid:
    def __init__(self, N, M):
        self.N, self.M = N, M
        k1 = np.arange(N // 2 + 1)
        k2 = np.arange(1, M + 1)
        self.kx = 2 * np.pi * k1[:, None]
        self.ky = np.pi * k2[None, :]
        self.lam = self.kx**2 + self.ky**2
        self.mask = (k1[:, None] < N / 3.0) & (k2[None, :] < 2.0 * (M + 1) / 3.0)
        # weight for the sum over the full (conjugate symmetric) k1 range
        wgt = np.full(N // 2 + 1, 2.0)
        wgt[0] = 1.0
        if N % 2 == 0:
            wgt[-1] = 1.0
        self.weight = wgt[:, None]
        self.x = np.arange(N) / N
        self.y = np.arange(1, M + 1) / (M + 1)


_GRIDS = {}


def _grid(N, M):
    g = _GRIDS.get((N, M))
    if g is None:
        g = _GRIDS[(N, M)] = _Grid(N, M)
    return g


def _to_modal(f):
    """Grid values (N, M) on interior y points -> modal coefficients."""
    N, M = f.shape
    return fft.dst(np.fft.rfft(f, axis=0) / N, type=1, axis=1) / (M + 1)


def _sine_to_grid(c, N):
    M = c.shape[1]
    return np.fft.irfft(fft.idst(c * (M + 1), type=1, axis=1), n=N, axis=0) * N


def _cosine_to_grid(c, N):
    """Series ``sum_{k2=1..M} c_k2 cos(pi k2 y)`` at interior grid points."""
    M = c.shape[1]
    X = np.zeros((c.shape[0], M + 2), dtype=complex)
    X[:, 1 : M + 1] = c / 2.0
    vals = fft.idct(X * 2 * (M + 1), type=1, axis=1)[:, 1:-1]
    return np.fft.irfft(vals, n=N, axis=0) * N


def oracle_init(vorticity, N, M=None, nu=0.0, dt=1e-3):
    """Spectral state from an analytic vorticity ``f(x, y)``.

    The coefficients are truncated to the dealiased range; the largest grid
    error of the truncated field is stored in ``truncation_error``.
    """
    M = N if M is None else M
    g = _grid(N, M)
    X, Y = np.meshgrid(g.x, g.y, indexing="ij")
    f = np.asarray(vorticity(X, Y), dtype=float) * np.ones_like(X)
    w = _to_modal(f) * g.mask
    err = float(np.abs(_sine_to_grid(w, N) - f).max())
    return SpectralState(w, N, M, nu, dt, truncation_error=err)


def kh_oracle_init(N, M=None, nu=0.0, dt=1e-3, config=None):
    return oracle_init(lambda x, y: initial_vorticity(x, y, config), N, M, nu, dt)


def oracle_velocity(state):
    """Velocity ``(u1, u2)`` on the (x_i, y_j) interior grid."""
    g = _grid(state.N, state.M)
    psi = state.w / g.lam
    u1 = _cosine_to_grid(psi * g.ky, state.N)
    u2 = -_sine_to_grid(1j * g.kx * psi, state.N)
    return u1, u2


def nonlinear_term(w, N, M):
    """Dealiased modal coefficients of ``u . grad(omega)``."""
    g = _grid(N, M)
    psi = w / g.lam
    u1 = _cosine_to_grid(psi * g.ky, N)
    u2 = -_sine_to_grid(1j * g.kx * psi, N)
    wx = _sine_to_grid(1j * g.kx * w, N)
    wy = _cosine_to_grid(w * g.ky, N)
    return _to_modal(u1 * wx + u2 * wy) * g.mask


def oracle_step(state):
    """Advance one step (IMEX Euler first, SBDF2 afterwards)."""
    g = _grid(state.N, state.M)
    dt, nu = state.dt, state.nu
    nl = nonlinear_term(state.w, state.N, state.M)
    if state.w_prev is None:
        w_new = (state.w - dt * nl) / (1.0 + dt * nu * g.lam)
    else:
        w_new = (4.0 * state.w - state.w_prev - 2.0 * dt * (2.0 * nl - state.n_prev)) / (
            3.0 + 2.0 * dt * nu * g.lam
        )
    return replace(state, w=w_new * g.mask, w_prev=state.w, n_prev=nl, step=state.step + 1)


def oracle_qoi(state):
    """Modal ``(K, E, P)``."""
    g = _grid(state.N, state.M)
    a = g.weight * np.abs(state.w) ** 2
    E = 0.25 * float(a.sum())
    K = 0.25 * float((a / g.lam).sum())
    P = 0.25 * float((a * g.lam).sum())
    return K, E, P


def grid_kinetic_energy(state):
    """K by quadrature of the grid velocity (trapezoid in y including walls)."""
    g = _grid(state.N, state.M)
    psi = state.w / g.lam
    M, N = state.M, state.N
    X = np.zeros((psi.shape[0], M + 2), dtype=complex)
    X[:, 1 : M + 1] = psi * g.ky / 2.0
    u1 = np.fft.irfft(fft.idct(X * 2 * (M + 1), type=1, axis=1), n=N, axis=0) * N
    u2 = -_sine_to_grid(1j * g.kx * psi, N)
    w = np.full(M + 2, 1.0 / (M + 1))
    w[[0, -1]] *= 0.5
    e1 = (u1**2).mean(axis=0) @ w
    e2 = (u2**2).mean(axis=0) @ w[1:-1]
    return 0.5 * (e1 + e2)

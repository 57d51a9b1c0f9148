"""Self-organization toolkit for 2D decaying flows in the periodic channel.

Eigenfunctions of ``-Laplace`` with vorticity vanishing on the walls and
periodicity in x are::

    w = c sin(2 a k1 x) sin(b k2 y)     ("sin" variant)
    w = c cos(2 a k1 x) sin(b k2 y)     ("cos" variant)

on the domain ``(0, pi/a) x (0, pi/b)`` (the unit square for ``a = b = pi``),
with eigenvalue ``lambda = 4 a^2 k1^2 + b^2 k2^2`` obtained by applying the
Laplacian to these functions.  Each eigenfunction is a steady solution of the
Euler equations, so ``w exp(-nu lambda t)`` solves Navier-Stokes exactly
(Taylor vortex).
"""
import csv
from dataclasses import dataclass

import numpy as np


def eigenvalue(k1, k2, a=np.pi, b=np.pi):
    """Eigenvalue ``4 a^2 k1^2 + b^2 k2^2``."""
    return 4.0 * a * a * k1 * k1 + b * b * k2 * k2


@dataclass(frozen=True)
class EigenMode:
    """Laplace eigenpair with unit L2-norm vorticity."""

    k1: int
    k2: int
    variant: str = "sin"
    a: float = np.pi
    b: float = np.pi

    def __post_init__(self):
        if self.variant not in ("sin", "cos"):
            raise ValueError("variant must be 'sin' or 'cos'")
        if self.k1 < 0 or self.k2 < 0:
            raise ValueError("wavenumbers must be nonnegative")

    @property
    def lam(self):
        return eigenvalue(self.k1, self.k2, self.a, self.b)

    @property
    def is_zero(self):
        """True if the eigenfunction vanishes identically."""
        return self.k2 == 0 or (self.k1 == 0 and self.variant == "sin")

    @property
    def norm_const(self):
        if self.is_zero:
            return 0.0
        c = 2.0 * np.sqrt(self.a * self.b) / np.pi
        return c if self.k1 > 0 else c / np.sqrt(2.0)

    def _xpart(self, x, d=0):
        w = 2.0 * self.a * self.k1
        if self.variant == "sin":
            return (np.sin, np.cos, lambda z: -np.sin(z))[d](w * x) * w**d
        return (np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z))[d](w * x) * w**d

    def _ypart(self, y, d=0):
        w = self.b * self.k2
        return (np.sin, np.cos, lambda z: -np.sin(z))[d](w * y) * w**d

    def vorticity(self, x, y):
        return self.norm_const * self._xpart(x) * self._ypart(y)

    def stream(self, x, y):
        """Stream function ``w / lambda`` (``-Laplace psi = w``)."""
        return self.vorticity(x, y) / self.lam

    def velocity(self, x, y):
        """``(d psi/dy, -d psi/dx)``."""
        c = self.norm_const / self.lam
        return c * self._xpart(x) * self._ypart(y, 1), -c * self._xpart(x, 1) * self._ypart(y)

    def laplacian(self, x, y):
        c = self.norm_const
        return c * (self._xpart(x, 2) * self._ypart(y) + self._xpart(x) * self._ypart(y, 2))


def taylor_vortex(mode, nu, t):
    """Exact decaying solution started from ``mode``.

    Returns
    -------
    vorticity, velocity : callable
        ``f(x, y)`` evaluated at time ``t``.
    """
    g = np.exp(-nu * mode.lam * t)

    def vorticity(x, y):
        return g * mode.vorticity(x, y)

    def velocity(x, y):
        u1, u2 = mode.velocity(x, y)
        return g * u1, g * u2

    return vorticity, velocity


def enumerate_modes(kmax, include_zero=False, a=np.pi, b=np.pi):
    """All eigenmodes with ``k1, k2 <= kmax`` sorted by eigenvalue.

    With ``include_zero=False`` modes whose eigenfunction vanishes identically
    (``k2 = 0`` or ``k1 = 0`` with the sine variant) are skipped.
    """
    modes = []
    for k1 in range(kmax + 1):
        for k2 in range(kmax + 1):
            for var in ("sin", "cos"):
                m = EigenMode(k1, k2, var, a, b)
                if m.is_zero and not include_zero:
                    continue
                if k1 == 0 and k2 == 0:
                    continue
                modes.append(m)
    modes.sort(key=lambda m: (m.lam, m.k1, m.k2, m.variant))
    return modes


def smallest_eigenvalue(convention="nonvanishing", a=np.pi, b=np.pi):
    """``mu_1`` for the decay bounds.

    ``"nonvanishing"`` (default) takes the smallest eigenvalue whose
    eigenfunction is not identically zero, ``pi^2`` on the unit square (the
    x-independent mode ``sin(pi y)``).  ``"literal"`` returns ``lambda_{1,0}``
    (``4 pi^2``), whose stated eigenfunction vanishes under the wall
    conditions.
    """
    if convention == "literal":
        return eigenvalue(1, 0, a, b)
    if convention != "nonvanishing":
        raise ValueError(f"unknown convention {convention!r}")
    return enumerate_modes(2, False, a, b)[0].lam


def rayleigh_quotient(K, E):
    """``Q = E / K``."""
    return np.asarray(E, dtype=float) / np.asarray(K, dtype=float)


def dissipation_quotient(E, P):
    """``Lambda = P / E``."""
    return np.asarray(P, dtype=float) / np.asarray(E, dtype=float)


@dataclass
class KETrajectory:
    """Sampled ``(t, K, E, P)`` series with derived quotients."""

    t: np.ndarray
    K: np.ndarray
    E: np.ndarray
    P: np.ndarray = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.K = np.asarray(self.K, dtype=float)
        self.E = np.asarray(self.E, dtype=float)
        if self.P is not None:
            self.P = np.asarray(self.P, dtype=float)

    @property
    def Q(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return rayleigh_quotient(self.K, self.E)

    @property
    def Lam(self):
        if self.P is None:
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            return dissipation_quotient(self.E, self.P)

    def write_csv(self, path):
        lam = self.Lam if self.P is not None else np.full(self.t.shape, np.nan)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "K", "E", "Q", "Lambda"])
            for row in zip(self.t, self.K, self.E, self.Q, lam):
                w.writerow([f"{v:.17g}" for v in row])


@dataclass
class DecayReport:
    """Per-sample outcome of the self-organization checks."""

    energy_bound: np.ndarray
    enstrophy_bound: np.ndarray
    q_nonincreasing: np.ndarray
    lambda_above_q: np.ndarray

    @property
    def ok(self):
        return bool(
            self.energy_bound.all()
            and self.enstrophy_bound.all()
            and self.q_nonincreasing.all()
            and self.lambda_above_q.all()
        )

    def summary(self):
        return {
            "energy_bound": bool(self.energy_bound.all()),
            "enstrophy_bound": bool(self.enstrophy_bound.all()),
            "q_nonincreasing": bool(self.q_nonincreasing.all()),
            "lambda_above_q": bool(self.lambda_above_q.all()),
        }


def decay_bound_check(traj, nu, mu1=None, bound_slack=1e-8, q_tol=1e-8, lam_tol=1e-8):
    """Check the decay bounds and the self-organization inequalities.

    Parameters
    ----------
    traj : KETrajectory
    nu : float
    mu1 : float, optional
        Smallest eigenvalue, default :func:`smallest_eigenvalue`.
    bound_slack : float
        Relative slack of ``E(t) <= E(0) exp(-2 nu mu1 t)`` (same for K).
    q_tol : float
        Relative increase of ``Q`` between consecutive samples tolerated as
        sampling noise.
    lam_tol : float
        ``Lambda - Q >= -lam_tol * Q``.
    """
    if mu1 is None:
        mu1 = smallest_eigenvalue()
    t = traj.t - traj.t[0]
    decay = np.exp(-2.0 * nu * mu1 * t)
    ebound = traj.E <= traj.E[0] * decay * (1.0 + bound_slack)
    kbound = traj.K <= traj.K[0] * decay * (1.0 + bound_slack)
    live = traj.K > 0
    Q = np.where(live, traj.Q, 0.0) if live.any() else np.zeros_like(traj.K)
    qmono = np.ones(t.shape, dtype=bool)
    qmono[1:] = Q[1:] <= Q[:-1] * (1.0 + q_tol)
    if traj.P is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(traj.E > 0, traj.P / np.where(traj.E > 0, traj.E, 1.0), 0.0)
        lq = lam - Q >= -lam_tol * Q
    else:
        lq = np.ones(t.shape, dtype=bool)
    return DecayReport(kbound, ebound, qmono, lq)

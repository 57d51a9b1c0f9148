"""Kelvin-Helmholtz problem parameters and the analytic initial condition."""
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

log = logging.getLogger(__name__)

DELTA0 = 1.0 / 28.0
U_INF = 1.0
C_N = 1e-3
REFERENCE_RE = (100.0, 1000.0, 10000.0)


def viscosity(Re):
    """Kinematic viscosity ``nu = 1 / (28 Re)``."""
    Re = float(Re)
    if not Re > 0:
        raise ValueError(f"Reynolds number must be positive, got {Re}")
    return DELTA0 * U_INF / Re


@dataclass
class KHConfig:
    """Physical and discretization parameters of one KH run.

    ``dt`` is in time units (default ``delta0 * 1e-3``) and ``t_end`` in
    multiples of ``tbar = delta0 / u_inf``.
    """

    Re: float = 100.0
    n: int = 16
    k: int = 4
    dt: float = None
    t_end: float = 400.0
    with_20pi: bool = True
    perturbation: dict = field(default_factory=lambda: {"kind": "none"})

    def __post_init__(self):
        if self.dt is None:
            self.dt = DELTA0 * 1e-3
        if float(self.Re) not in REFERENCE_RE:
            log.info("Re=%g is not one of the reference Reynolds numbers", self.Re)

    @property
    def nu(self):
        return viscosity(self.Re)

    @property
    def delta0(self):
        return DELTA0

    @property
    def u_inf(self):
        return U_INF

    @property
    def c_n(self):
        return C_N

    @property
    def tbar(self):
        return DELTA0 / U_INF

    @property
    def is_reference(self):
        return float(self.Re) in REFERENCE_RE

    def as_dict(self):
        return asdict(self)


def stream_perturbation(x, y, with_20pi=True):
    """Perturbation stream function and its derivatives ``(psi, psi_x, psi_y)``."""
    g = U_INF * np.exp(-((y - 0.5) ** 2) / DELTA0**2)
    c = np.cos(8 * np.pi * x) + (np.cos(20 * np.pi * x) if with_20pi else 0.0)
    s = 8 * np.pi * np.sin(8 * np.pi * x) + (20 * np.pi * np.sin(20 * np.pi * x) if with_20pi else 0.0)
    psi = g * c
    return psi, -g * s, -2.0 * (y - 0.5) / DELTA0**2 * psi


def initial_velocity(x, y, config=None):
    """Analytic KH initial velocity ``(u1, u2)``.

    ``u1 = u_inf tanh((2y-1)/delta0) + c_n psi_y``, ``u2 = -c_n psi_x``.
    """
    with_20pi = True if config is None else config.with_20pi
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _, px, py = stream_perturbation(x, y, with_20pi)
    u1 = U_INF * np.tanh((2 * y - 1) / DELTA0) + C_N * py
    u2 = -C_N * px
    return u1, u2


def initial_vorticity(x, y, config=None):
    """Analytic vorticity ``d u2/dx - d u1/dy`` of the initial condition."""
    with_20pi = True if config is None else config.with_20pi
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = U_INF * np.exp(-((y - 0.5) ** 2) / DELTA0**2)
    c = np.cos(8 * np.pi * x) + (np.cos(20 * np.pi * x) if with_20pi else 0.0)
    cxx = -(64 * np.pi**2) * np.cos(8 * np.pi * x) - (
        400 * np.pi**2 * np.cos(20 * np.pi * x) if with_20pi else 0.0
    )
    yy = y - 0.5
    gyy = g * (4 * yy**2 / DELTA0**4 - 2 / DELTA0**2)
    lap_psi = g * cxx + gyy * c
    shear = -(2 * U_INF / DELTA0) / np.cosh((2 * y - 1) / DELTA0) ** 2
    return shear - C_N * lap_psi


def shear_velocity(x, y):
    """Unperturbed tanh shear layer."""
    y = np.asarray(y, dtype=float)
    return U_INF * np.tanh((2 * y - 1) / DELTA0) + 0.0 * np.asarray(x), 0.0 * y + 0.0 * np.asarray(x)

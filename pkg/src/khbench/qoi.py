"""Quantities of interest: energy, enstrophy, palinstrophy, vorticity
thickness, spectra, profiles and the integrated numerical dissipation."""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import assembly
from .fem_space import broken_curl, broken_grad_curl, grid_values, x_mean_profile
from .kh_setup import DELTA0, U_INF


@dataclass
class QoiRecord:
    """One time sample."""

    step: int
    t: float
    K: float
    E: float
    P: float
    delta_ratio: float
    eps_int: float = 0.0
    eps_rel: float = float("nan")

    @property
    def t_over_tbar(self):
        return self.t / (DELTA0 / U_INF)


@dataclass
class SpectrumRecord:
    t: float
    kappa: np.ndarray
    E: np.ndarray


@dataclass
class ProfileRecord:
    t: float
    y: np.ndarray
    mean: np.ndarray
    rms: np.ndarray


def _mass(space):
    cache = space.__dict__.setdefault("_qoi_cache", {})
    if "M" not in cache:
        cache["M"] = assembly.mass_operator(space.rt)
    return cache["M"]


def kinetic_energy(field):
    """``K = 1/2 ||u||^2`` (exact quadrature through the mass operator)."""
    u = field.u
    return 0.5 * float(u @ _mass(field.space).matvec(u))


def enstrophy(field):
    """``E = 1/2 ||curl_h u||^2`` with broken derivatives."""
    return 0.5 * broken_curl(field).norm_squared()


def palinstrophy(field):
    """``P = 1/2 ||grad_h curl_h u||^2`` with broken derivatives."""
    return 0.5 * broken_grad_curl(field).norm_squared()


def vorticity_thickness(field, nlines=1024, delta0=DELTA0):
    """``delta / delta0`` with ``delta = 2 u_inf / max_j |<omega>(y_j)|``.

    ``<omega>`` is the exact x-average along ``nlines`` equidistant lines in
    [0, 1].

    Raises
    ------
    ValueError
        If the averaged vorticity vanishes (to roundoff) on every line.
    """
    ys = np.linspace(0.0, 1.0, nlines)
    m = np.abs(x_mean_profile(field, ys, "omega")).max()
    # roundoff level of a velocity gradient on this mesh
    floor = 1e-12 * np.abs(field.u).max() / field.space.h
    if not m > floor:
        raise ValueError("undefined thickness: the x-averaged vorticity vanishes")
    return 2.0 * U_INF / m / delta0


def mean_profile(field, nx=1024, ny=1024):
    """Arithmetic x-average and RMS profile of ``u1`` on ``ny`` lines."""
    xs = np.arange(nx) / nx
    ys = np.linspace(0.0, 1.0, ny)
    u1 = grid_values(field, xs, ys, "u1")
    mean = u1.mean(axis=0)
    rms = np.sqrt(((u1 - mean) ** 2).mean(axis=0))
    return ProfileRecord(field.t, ys, mean, rms)


def spectrum_from_samples(u1, ys, t=0.0):
    """One-sided spectrum ``E(kappa) = int |u1_hat(kappa, y)|^2 dy``.

    ``u1`` has shape (nsamples, nlines) with samples at ``x_i = i/nsamples``;
    ``u1_hat = fft(u1) / nsamples`` so ``cos(2 pi x)`` gives ``E(1) = 1/4``.
    """
    ns = u1.shape[0]
    uh = np.fft.fft(u1, axis=0)[: ns // 2 + 1] / ns
    E = trapezoid(np.abs(uh) ** 2, ys, axis=1)
    return SpectrumRecord(t, np.arange(ns // 2 + 1), E)


def spectrum(field, lines=1024, samples=1024):
    """Longitudinal spectrum of ``u1`` sampled on ``lines`` x ``samples`` points."""
    xs = np.arange(samples) / samples
    ys = np.linspace(0.0, 1.0, lines)
    return spectrum_from_samples(grid_values(field, xs, ys, "u1"), ys, field.t)


def numerical_dissipation(t, K, E, nu):
    """``eps_int(t) = |K(0) - K(t) - 2 nu int_0^t E|`` and ``eps_rel``.

    The time integral uses the composite trapezoid rule on the samples;
    ``eps_rel = eps_int / |K(0) - K(t)|`` (NaN where no energy was lost).
    """
    t = np.asarray(t, dtype=float)
    K = np.asarray(K, dtype=float)
    E = np.asarray(E, dtype=float)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (E[1:] + E[:-1]) * np.diff(t))])
    eps = np.abs(K[0] - K - 2.0 * nu * integral)
    loss = np.abs(K[0] - K)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(loss > 0, eps / np.where(loss > 0, loss, 1.0), np.nan)
    return eps, rel


class DissipationTracker:
    """Running version of :func:`numerical_dissipation`."""

    def __init__(self, nu):
        self.nu = nu
        self.K0 = None
        self.integral = 0.0
        self._last = None

    def update(self, t, K, E):
        if self.K0 is None:
            self.K0 = K
        else:
            t0, E0 = self._last
            self.integral += 0.5 * (E + E0) * (t - t0)
        self._last = (t, E)
        eps = abs(self.K0 - K - 2.0 * self.nu * self.integral)
        loss = abs(self.K0 - K)
        return eps, (eps / loss if loss > 0 else float("nan"))


def compute_record(field, step, tracker=None, nlines=1024):
    """All scalar QoIs of one field."""
    K = kinetic_energy(field)
    E = enstrophy(field)
    P = palinstrophy(field)
    try:
        d = vorticity_thickness(field, nlines)
    except ValueError:
        d = float("nan")
    eps, rel = tracker.update(field.t, K, E) if tracker is not None else (0.0, float("nan"))
    return QoiRecord(step, field.t, K, E, P, d, eps, rel)

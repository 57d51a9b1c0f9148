import numpy as np
import pytest

from khbench import spectral_oracle as so
from khbench.kh_setup import DELTA0, KHConfig, initial_vorticity
from khbench.selforg import EigenMode


def test_eigenmode_single_coefficient():
    mode = EigenMode(1, 1)
    s = so.oracle_init(mode.vorticity, 32, 32)
    nz = np.abs(s.w) > 1e-12
    assert nz.sum() == 1 and nz[1, 0]
    K, E, P = so.oracle_qoi(s)
    lam = mode.lam
    assert (K, E, P) == pytest.approx((1 / (2 * lam), 0.5, lam / 2), rel=1e-12)
    assert K == pytest.approx(1 / (2 * 5 * np.pi**2), rel=1e-12)


def test_shear_only_mean_column():
    s = so.oracle_init(lambda x, y: initial_vorticity(x, y) * 0 + (-2 / DELTA0) / np.cosh((2 * y - 1) / DELTA0) ** 2, 32, 64)
    assert np.abs(s.w[1:]).max() < 1e-12
    assert np.abs(s.w[0]).max() > 1
    u1, u2 = so.oracle_velocity(s)
    assert np.abs(u2).max() < 1e-12


def test_kh_energy_at_ic_wavenumbers():
    s = so.kh_oracle_init(128, 128, 0.0, 1.0, KHConfig())
    amp = (np.abs(s.w[1:]) ** 2).sum(axis=1)
    top = np.argsort(amp)[::-1][:2] + 1
    assert sorted(top) == [4, 10]


def test_zero_state():
    s = so.oracle_init(lambda x, y: 0 * x, 16, 16, 1e-3, 0.1)
    assert so.oracle_qoi(s) == (0.0, 0.0, 0.0)
    u1, u2 = so.oracle_velocity(s)
    assert not u1.any() and not u2.any()
    assert not so.oracle_step(s).w.any()


def test_velocity_matches_analytic():
    mode = EigenMode(2, 3)
    s = so.oracle_init(mode.vorticity, 32, 32)
    g = so._grid(32, 32)
    X, Y = np.meshgrid(g.x, g.y, indexing="ij")
    u1, u2 = so.oracle_velocity(s)
    e1, e2 = mode.velocity(X, Y)
    assert np.allclose(u1, e1, atol=1e-13) and np.allclose(u2, e2, atol=1e-13)


def test_parseval():
    s = so.kh_oracle_init(64, 64, 0.0, 1.0, KHConfig())
    K, _, _ = so.oracle_qoi(s)
    assert so.grid_kinetic_energy(s) == pytest.approx(K, abs=1e-10)


def test_eigenmode_decay():
    mode = EigenMode(1, 1)
    nu, dt = 1e-3, DELTA0 * 1e-3
    s = so.oracle_init(mode.vorticity, 16, 16, nu, dt)
    w0 = s.w[1, 0]
    nsteps = int(round(1.0 / dt))
    for _ in range(nsteps):
        s = so.oracle_step(s)
    exact = np.exp(-nu * mode.lam * s.t)
    assert abs(s.w[1, 0] / w0 - exact) / exact <= 1e-6


def test_inviscid_conservation():
    s = so.kh_oracle_init(32, 32, 0.0, 1e-3, KHConfig())
    K0, E0, _ = so.oracle_qoi(s)
    # the dealiased nonlinear term is orthogonal to w and to psi
    nl = so.nonlinear_term(s.w, 32, 32)
    g = so._grid(32, 32)
    assert abs((g.weight * (np.conj(s.w) * nl)).sum().real) < 1e-10 * np.abs(s.w).max() * np.abs(nl).max()
    assert abs((g.weight * (np.conj(s.w / g.lam) * nl)).sum().real) < 1e-10 * np.abs(s.w).max() * np.abs(nl).max()

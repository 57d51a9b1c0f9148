import numpy as np
import pytest

from khbench import build_quad_mesh, build_space, project_initial_condition, qoi
from khbench.kh_setup import KHConfig, initial_velocity, shear_velocity
from khbench.selforg import EigenMode


def const(x, y):
    return np.ones_like(x), np.zeros_like(x)


@pytest.fixture(scope="module")
def kh32k8():
    s = build_space(build_quad_mesh(32), 8)
    cfg = KHConfig(100.0, 32, 8)
    return project_initial_condition(s, lambda x, y: initial_velocity(x, y, cfg))


def test_constant_field(space_n4k2):
    f = project_initial_condition(space_n4k2, const)
    assert qoi.kinetic_energy(f) == pytest.approx(0.5, abs=1e-14)
    assert qoi.enstrophy(f) < 1e-24
    assert qoi.palinstrophy(f) < 1e-20
    with pytest.raises(ValueError, match="undefined thickness"):
        qoi.vorticity_thickness(f)
    pr = qoi.mean_profile(f, 16, 9)
    assert np.allclose(pr.mean, 1.0) and np.allclose(pr.rms, 0.0, atol=1e-13)
    sp = qoi.spectrum(f, 9, 16)
    assert sp.E[0] == pytest.approx(1.0) and np.allclose(sp.E[1:], 0.0, atol=1e-26)


def test_eigenmode_values():
    mode = EigenMode(1, 1)
    s = build_space(build_quad_mesh(16), 6)
    f = project_initial_condition(s, mode.velocity)
    lam = mode.lam
    assert qoi.kinetic_energy(f) == pytest.approx(1 / (2 * lam), rel=1e-9)
    assert qoi.enstrophy(f) == pytest.approx(0.5, rel=1e-6)
    assert qoi.palinstrophy(f) == pytest.approx(lam / 2, rel=1e-3)


def test_cosine_spectrum_normalization():
    ys = np.linspace(0, 1, 5)
    xs = np.arange(64) / 64
    u1 = np.cos(2 * np.pi * xs)[:, None] * np.ones_like(ys)
    sp = qoi.spectrum_from_samples(u1, ys)
    assert sp.E[1] == pytest.approx(0.25)
    assert np.allclose(np.delete(sp.E, 1), 0.0, atol=1e-30)


def test_kh_spectrum_peaks(kh32k8):
    sp = qoi.spectrum(kh32k8, 256, 256)
    top = np.argsort(sp.E[1:])[::-1][:2] + 1
    assert sorted(top) == [4, 10]


def test_kh_initial_thickness(kh32k8):
    assert qoi.vorticity_thickness(kh32k8) == pytest.approx(1.0, abs=0.02)


def test_pure_shear_thickness():
    s = build_space(build_quad_mesh(32), 8)
    f = project_initial_condition(s, shear_velocity)
    assert qoi.vorticity_thickness(f) == pytest.approx(1.0, abs=0.02)


def test_kh_profile_at_midline(kh32k8):
    pr = qoi.mean_profile(kh32k8, 256, 1025)
    mid = np.argmin(np.abs(pr.y - 0.5))
    assert pr.y[mid] == 0.5
    assert abs(pr.mean[mid]) < 1e-3
    assert pr.rms[mid] < 1e-4


def test_numerical_dissipation():
    t = np.linspace(0, 1, 11)
    eps, rel = qoi.numerical_dissipation(t, np.full(11, 0.5), np.zeros(11), 0.0)
    assert not eps.any()
    assert np.isnan(rel).all()
    # exact exponential decay with the matching enstrophy gives O(dt^2) defect
    nu, lam = 0.1, 3.0
    t = np.linspace(0, 1, 1001)
    K = 0.5 * np.exp(-2 * nu * lam * t)
    eps, rel = qoi.numerical_dissipation(t, K, lam * K, nu)
    assert eps.max() < 1e-7


def test_tracker_matches_batch():
    rng = np.random.default_rng(5)
    t = np.cumsum(rng.random(20))
    K = 1 - 0.01 * t
    E = 1 + rng.random(20)
    eps, rel = qoi.numerical_dissipation(t, K, E, 1e-3)
    tr = qoi.DissipationTracker(1e-3)
    out = np.array([tr.update(*v) for v in zip(t, K, E)])
    assert np.allclose(out[:, 0], eps, rtol=1e-12, atol=1e-15)


def test_record(kh32k8):
    r = qoi.compute_record(kh32k8, 0)
    assert r.K == pytest.approx(0.4822, abs=5e-4)
    assert r.E == pytest.approx(37.63, abs=0.05)
    assert r.t_over_tbar == 0.0

import numpy as np
import pytest

from khbench import build_quad_mesh, build_space, project_initial_condition
from khbench.kh_setup import DELTA0, KHConfig, initial_velocity
from khbench.selforg import EigenMode
from khbench.timestepper import (
    BlowUpError,
    Discretization,
    SBDF2Stepper,
    TimeState,
    initial_state,
    load_checkpoint,
    save_checkpoint,
)


@pytest.fixture(scope="module")
def space():
    return build_space(build_quad_mesh(8), 4)


def _taylor(space, formulation="stream"):
    mode = EigenMode(1, 1)
    f = project_initial_condition(space, mode.velocity, formulation)
    return mode, f


@pytest.mark.parametrize("formulation", ["stream", "mixed"])
def test_zero_stays_zero(space, formulation):
    disc = Discretization(space, 1e-3, formulation)
    st = SBDF2Stepper(disc, 0.01)
    x = initial_state(np.zeros(disc.size), 0.01)
    for _ in range(3):
        x = st.advance(x)
    assert not x.u_curr.any()


def test_time_is_product():
    s = TimeState(None, np.zeros(1), 1000003, 0.1)
    assert s.t == 1000003 * 0.1


def test_euler_step_decay(space):
    nu, dt = 1e-3, 0.01
    mode, f = _taylor(space)
    disc = Discretization(space, nu)
    st = SBDF2Stepper(disc, dt, precision="double")
    x0 = initial_state(disc.from_field(f), dt)
    x1 = st.first_step(x0)
    K0, K1 = disc.kinetic_energy(x0.u_curr), disc.kinetic_energy(x1.u_curr)
    exact = np.exp(-2 * nu * mode.lam * dt)
    # first order accurate: the relative drop is 2 nu lam dt up to O(dt^2)
    assert (K0 - K1) / K0 == pytest.approx(1 - exact, rel=0.05)


def test_sbdf2_second_order(space):
    nu, T = 1e-3, 0.5
    mode, f = _taylor(space)
    errs = []
    for dt in (0.05, 0.025, 0.0125):
        disc = Discretization(space, nu)
        st = SBDF2Stepper(disc, dt, precision="double")
        x = initial_state(disc.from_field(f), dt)
        K0 = disc.kinetic_energy(x.u_curr)
        for _ in range(int(round(T / dt))):
            x = st.advance(x)
        errs.append(abs(disc.kinetic_energy(x.u_curr) - K0 * np.exp(-2 * nu * mode.lam * T)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 3.5) & (ratios < 4.5)), ratios


def test_stream_and_mixed_agree(space):
    cfg = KHConfig(100.0, 8, 4)
    fn = lambda x, y: initial_velocity(x, y, cfg)
    dt = DELTA0 * 1e-3
    out = {}
    for form in ("stream", "mixed"):
        disc = Discretization(space, cfg.nu, form)
        st = SBDF2Stepper(disc, dt, precision="double")
        x = initial_state(disc.from_field(project_initial_condition(space, fn, form)), dt)
        for _ in range(5):
            x = st.advance(x)
        out[form] = disc.to_field(x.u_curr).u
    assert np.abs(out["stream"] - out["mixed"]).max() < 1e-10


def test_kh_step_refinements():
    s = build_space(build_quad_mesh(16), 4)
    cfg = KHConfig(100.0, 16, 4)
    disc = Discretization(s, cfg.nu)
    st = SBDF2Stepper(disc, cfg.dt)
    x = initial_state(disc.from_field(project_initial_condition(s, lambda x, y: initial_velocity(x, y, cfg))), cfg.dt)
    for _ in range(3):
        x = st.advance(x)
    assert max(st.refinement_counts) <= 3


def test_regularized_needs_mixed(space):
    disc = Discretization(space, 1e-3)
    with pytest.raises(ValueError):
        disc.factorize(0.01, regularized=True)


def test_blowup_guard(space):
    mode, f = _taylor(space)
    disc = Discretization(space, 1e-3)
    st = SBDF2Stepper(disc, 0.01, hook=lambda x, step: 2.0 * x)
    with pytest.raises(BlowUpError, match="time step"):
        st.advance(initial_state(disc.from_field(f), 0.01))


def test_checkpoint_roundtrip(tmp_path, space):
    mode, f = _taylor(space)
    disc = Discretization(space, 1e-3)
    st = SBDF2Stepper(disc, 0.01)
    x = initial_state(disc.from_field(f), 0.01)
    for _ in range(4):
        x = st.advance(x)
    path = tmp_path / "c.npz"
    save_checkpoint(path, x, "abc")
    y = load_checkpoint(path, "abc")
    assert y.step == 4 and y.dt == 0.01
    assert np.array_equal(y.u_prev, x.u_prev) and np.array_equal(y.u_curr, x.u_curr)
    with pytest.raises(ValueError):
        load_checkpoint(path, "other")
    # continuing from the checkpoint reproduces the uninterrupted run bitwise
    a = st.advance(x)
    b = SBDF2Stepper(disc, 0.01).advance(y)
    assert np.array_equal(a.u_curr, b.u_curr)

import math

import numpy as np
import pytest

from khbench import perturb
from khbench.cli_io import make_config


def small(**kw):
    base = dict(Re=1000, n=4, k=2, dt_tbar=0.01, t_end=2.0, qoi_every=5, snapshot_times=[])
    base.update(kw)
    return make_config(base)


@pytest.mark.parametrize(
    "text, kind, params",
    [
        ("none", "none", ()),
        ("solver_rtol(1e-6)", "solver_rtol", (1e-6,)),
        ("convection_quadrature_order(16)", "convection_quadrature_order", (16,)),
        ("regularized_direct_solve", "regularized_direct_solve", ()),
        ("rounding_noise(1e-15, 7)", "rounding_noise", (1e-15, 7)),
        ("eigenmode_seed(1, 1, 1e-8)", "eigenmode_seed", (1, 1, 1e-8)),
    ],
)
def test_parse(text, kind, params):
    s = perturb.parse_spec(text)
    assert s.kind == kind and s.params == params
    assert perturb.parse_spec(s.label()) == s


@pytest.mark.parametrize("bad", ["bogus", "solver_rtol", "solver_rtol(-1)", "eigenmode_seed(1,2)", "x(("])
def test_parse_errors(bad):
    with pytest.raises(ValueError):
        perturb.parse_spec(bad)


def test_rounding_noise_hook():
    v = np.linspace(1, 2, 100)
    assert perturb.rounding_noise_step_hook(v, 0.0, 3, 5) is v
    a = perturb.rounding_noise_step_hook(v, 1e-12, 3, 5)
    b = perturb.rounding_noise_step_hook(v, 1e-12, 3, 5)
    c = perturb.rounding_noise_step_hook(v, 1e-12, 4, 5)
    d = perturb.rounding_noise_step_hook(v, 1e-12, 3, 6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    assert np.all(np.abs(a / v - 1) <= 1e-12)
    assert perturb.parse_spec("rounding_noise").rho == 2.0**-52


def test_report_identical():
    t = np.arange(5.0)
    q = {"P": np.ones(5)}
    r = perturb.divergence_report(t, q, q)
    assert r.t_div["P"] == math.inf and r.max_dev["P"] == 0.0


def test_report_threshold():
    t = np.arange(5.0)
    r = perturb.divergence_report(t, {"P": np.ones(5)}, {"P": np.array([1, 1, 1.05, 1.2, 1.0])}, window=2.0)
    assert r.t_div["P"] == 3.0
    assert r.max_dev["P"] == pytest.approx(0.05)
    assert r.deviation_at("P", 3.1) == pytest.approx(0.2)


def test_run_pair_none():
    rep = perturb.run_pair(small(), "none")
    assert all(v == math.inf for v in rep.t_div.values())
    assert all(v == 0.0 for v in rep.max_dev.values())


def test_run_pair_seeds_differ():
    cfg = small(t_end=1.0)
    a = perturb.run_pair(cfg, "rounding_noise(1e-10, 1)")
    b = perturb.run_pair(cfg, "rounding_noise(1e-10, 2)")
    assert a.max_dev["P"] > 0 and b.max_dev["P"] > 0
    assert not np.array_equal(a.deviation["P"], b.deviation["P"])
    again = perturb.run_pair(cfg, "rounding_noise(1e-10, 1)")
    assert np.array_equal(a.deviation["P"], again.deviation["P"])


@pytest.mark.parametrize(
    "spec", ["solver_rtol(1e-6)", "convection_quadrature_order(4)", "regularized_direct_solve", "eigenmode_seed(1,1,1e-6)"]
)
def test_run_pair_kinds(spec):
    rep = perturb.run_pair(small(t_end=1.0), perturb.parse_spec(spec, at_tbar=0.5))
    assert rep.max_dev["P"] > 0
    assert rep.max_dev["K"] < 1e-2


def test_report_csv(tmp_path):
    r = perturb.divergence_report(np.arange(3.0), {"P": np.ones(3)}, {"P": np.ones(3)})
    r.write_csv(tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "t_over_tbar,dev_P"

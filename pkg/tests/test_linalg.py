import numpy as np
import pytest
import scipy.sparse as sp

from khbench import assembly, build_quad_mesh, build_space, linalg


def test_identity():
    op = linalg.factorize(sp.identity(7, format="csc"))
    b = np.arange(7.0)
    x, info = linalg.solve_refined(op, b)
    assert np.array_equal(x, b)
    assert info.refinements == 0


def test_zero_rhs():
    op = linalg.factorize(sp.identity(5, format="csc") * 3.0)
    x, info = linalg.solve_refined(op, np.zeros(5))
    assert not x.any()
    assert info.refinements == 0


def _saddle(n=3, k=2, theta_dt=0.01):
    s = build_space(build_quad_mesh(n), k)
    M = assembly.assemble_mass(s) + theta_dt * assembly.assemble_viscous(s, 1.0)
    D = assembly.assemble_divergence(s)
    K, keep = assembly.gauge_fixed(s, sp.bmat([[M, -D.T], [-D, None]]))
    return s, K.tocsc()


@pytest.mark.parametrize("precision", ["double", "single"])
def test_indefinite_solve(precision, rng):
    _, K = _saddle()
    b = rng.standard_normal(K.shape[0])
    op = linalg.factorize(K, "indefinite", precision=precision)
    x, info = linalg.solve_refined(op, b)
    assert np.linalg.norm(b - K @ x) <= 1e-12 * np.linalg.norm(b)
    if precision == "single":
        assert info.refinements >= 1


def test_cholesky_rejects_saddle_point():
    _, K = _saddle()
    with pytest.raises(linalg.FactorizationError):
        linalg.factorize(K, "cholesky")


def test_cholesky_accepts_spd(rng):
    A = sp.random(30, 30, 0.2, random_state=1)
    A = (A @ A.T + 30 * sp.identity(30)).tocsc()
    op = linalg.factorize(A, "cholesky")
    b = rng.standard_normal(30)
    x, _ = linalg.solve_refined(op, b)
    assert np.allclose(A @ x, b)


def test_extended_residual(rng):
    _, K = _saddle()
    op = linalg.factorize(K, "indefinite", precision="single", residual_precision="extended")
    b = rng.standard_normal(K.shape[0])
    x, info = linalg.solve_refined(op, b)
    assert info.residual <= 1e-12


def test_refinement_failure_is_reported(rng):
    A = sp.diags(np.linspace(1.0, 2.0, 20)).tocsc()
    op = linalg.factorize(A)
    # a deliberately wrong inner solve cannot converge
    bad = op.with_settings(inner=lambda b: 0.1 * b, max_refinements=3)
    with pytest.raises(linalg.RefinementError):
        linalg.solve_refined(bad, rng.standard_normal(20))


@pytest.mark.parametrize("n, k", [(1, 1), (3, 2), (4, 3)])
def test_circulant_matches_sparse(n, k, rng):
    s = build_space(build_quad_mesh(n), k)
    ops = assembly.build_operators(s.stream, 0.3)
    op = ops.M.combine(ops.A, 1.0, 0.05)
    A = op.to_sparse().tocsc()
    b = rng.standard_normal(A.shape[0])
    for precision in ("double", "single"):
        fac = linalg.factorize_circulant(op, precision=precision)
        x, _ = linalg.solve_refined(fac, b)
        assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_circulant_rejects_indefinite():
    s = build_space(build_quad_mesh(4), 2)
    ops = assembly.build_operators(s.stream, 1.0, alpha=0.1)
    with pytest.raises(linalg.FactorizationError):
        linalg.factorize_circulant(ops.M.combine(ops.A, 1.0, 1.0))

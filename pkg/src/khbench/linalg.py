"""Direct factorizations with iterative refinement on the true residual.

Two back ends are provided:

* :func:`factorize` wraps SuperLU for general sparse symmetric matrices
  (saddle point Stokes systems).  ``method`` selects pivoted LU
  (``"indefinite"``), diagonal pivoting only (``"ldlt"``) or a check for
  positive pivots (``"cholesky"``), which fails on indefinite input instead of
  returning wrong answers.
* :func:`factorize_circulant` handles operators that are block circulant in
  x (periodic direction) with a few extra coupled unknowns.  The system is
  diagonalized by an FFT over the columns and every Fourier block is
  Hermitian positive definite and banded, so it is factorized with a banded
  Cholesky.

The factorization may be held in single precision; refinement then recovers
double precision accuracy, each correction reducing the residual by roughly
``cond * eps_single``.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_DTYPES = {"single": (np.float32, np.complex64), "double": (np.float64, np.complex128)}


class FactorizationError(RuntimeError):
    """The factorization broke down (singular or wrong inertia)."""


class RefinementError(RuntimeError):
    """Iterative refinement stagnated or ran out of iterations."""


@dataclass
class SolveInfo:
    refinements: int
    residual: float
    history: list = field(default_factory=list)


class FactorizedOperator:
    """Factorization plus the operator used for true residuals.

    Parameters
    ----------
    apply : callable
        ``x -> A x`` with the unfactorized matrix.
    inner : callable
        Approximate solve with the stored factors.
    size : int
    rtol : float
        Relative 2-norm residual target.
    max_refinements : int
    refine : bool
        If False a single factor solve is returned unchecked.
    """

    def __init__(
        self, apply, inner, size, rtol=1e-12, max_refinements=10, refine=True, info=None, residual=None
    ):
        self.apply = apply
        self.residual = residual or (lambda b, x: b - apply(x))
        self.inner = inner
        self.size = size
        self.rtol = rtol
        self.max_refinements = max_refinements
        self.refine = refine
        self.info = dict(info or {})

    def solve(self, b):
        """Solve with the factors only (no refinement)."""
        return self.inner(np.asarray(b, dtype=float))

    def with_settings(self, **kw):
        out = FactorizedOperator(
            self.apply,
            self.inner,
            self.size,
            self.rtol,
            self.max_refinements,
            self.refine,
            self.info,
            self.residual,
        )
        for key, val in kw.items():
            setattr(out, key, val)
        return out


def solve_refined(op, b):
    """Solve ``A x = b`` to ``||b - A x|| <= rtol ||b||``.

    Returns
    -------
    x : ndarray
    info : SolveInfo
        ``refinements`` counts correction solves after the first one.

    Raises
    ------
    RefinementError
        If the residual stops decreasing before reaching the tolerance.
    """
    b = np.asarray(b, dtype=float)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros_like(b), SolveInfo(0, 0.0, [0.0])
    x = op.inner(b)
    if not op.refine:
        return x, SolveInfo(0, float("nan"), [])
    r = op.residual(b, x)
    res = np.linalg.norm(r) / nb
    hist = [res]
    it = 0
    while res > op.rtol:
        if it >= op.max_refinements:
            raise RefinementError(
                f"no convergence after {it} refinements (residual {res:.3e}, rtol {op.rtol:.1e})"
            )
        x = x + op.inner(r)
        r = op.residual(b, x)
        new = np.linalg.norm(r) / nb
        it += 1
        hist.append(new)
        if new > op.rtol and new >= res:
            raise RefinementError(f"refinement stagnated at residual {new:.3e} after {it} steps")
        res = new
    return x, SolveInfo(it, float(res), hist)


# ------------------------------------------------------------------ SuperLU
def factorize(
    matrix,
    method="indefinite",
    regularization=None,
    pressure_mass=None,
    precision="double",
    rtol=1e-12,
    max_refinements=10,
    refine=True,
    residual_precision="double",
):
    """Factorize a sparse symmetric matrix.

    Parameters
    ----------
    matrix : sparse matrix
    method : {"indefinite", "ldlt", "cholesky"}
    regularization : float, optional
        Scale ``s``; the factorized matrix is ``matrix + s * pressure_mass``
        while residuals use ``matrix``.
    pressure_mass : sparse matrix, optional
        Same shape as ``matrix`` (zero outside the pressure block).
    precision : {"double", "single"}
        Precision of the stored factors.
    residual_precision : {"double", "extended"}
        ``"extended"`` evaluates residuals in ``np.longdouble``.

    Raises
    ------
    FactorizationError
    """
    A = sp.csc_matrix(matrix, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    F = A
    if regularization is not None:
        if pressure_mass is None:
            raise ValueError("regularization needs the pressure mass matrix")
        F = (A + regularization * sp.csc_matrix(pressure_mass)).tocsc()
    rdt = _DTYPES[precision][0]
    Ff = F.astype(rdt)
    try:
        if method == "indefinite":
            lu = spla.splu(Ff, permc_spec="COLAMD")
        elif method in ("ldlt", "cholesky"):
            lu = spla.splu(
                Ff,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        else:
            raise ValueError(f"unknown factorization method {method!r}")
    except RuntimeError as exc:
        raise FactorizationError(str(exc)) from exc
    if method in ("ldlt", "cholesky"):
        if not np.array_equal(lu.perm_r, lu.perm_c):
            raise FactorizationError("symmetric pivoting failed (zero pivot encountered)")
        d = lu.U.diagonal()
        if np.any(d == 0) or not np.all(np.isfinite(d)):
            raise FactorizationError("zero pivot")
        if method == "cholesky" and np.any(d <= 0):
            raise FactorizationError(f"matrix is not positive definite ({np.sum(d <= 0)} nonpositive pivots)")

    def inner(b):
        return lu.solve(np.asarray(b, dtype=rdt)).astype(float)

    def apply(x):
        return A @ x

    residual = None
    if residual_precision == "extended":
        Ae = A.astype(np.longdouble)

        def residual(b, x):
            r = b.astype(np.longdouble) - Ae @ x.astype(np.longdouble)
            return r.astype(float)

    info = {"backend": "superlu", "method": method, "precision": precision, "nnz_factors": lu.L.nnz + lu.U.nnz}
    info["residual_precision"] = residual_precision
    return FactorizedOperator(apply, inner, A.shape[0], rtol, max_refinements, refine, info, residual)


# ------------------------------------------------------------ block circulant
def circulant_blocks(op, layout=None):
    """Fourier symbols of a block circulant operator.

    Parameters
    ----------
    op : LocalOperator
        Operator whose basis carries ``circulant = (n, S, 1)``.

    Returns
    -------
    dict
        ``entries``: (r, s, column shift, value) of the first block row with
        ``s >= r``; ``q``: coupling of the first column to the extra unknown;
        ``qq``: diagonal entry of the extra unknown; ``n``, ``S``.
    """
    n, S, nextra = layout or op.basis.circulant
    if nextra != 1:
        raise NotImplementedError("exactly one extra unknown is supported")
    N = op.basis.ndofs
    Qi = n * S
    rows = np.zeros(N, dtype=bool)
    rows[:S] = True
    rows[Qi] = True
    A = op.to_sparse(rows=rows).tocoo()
    r, c, v = A.row, A.col, A.data
    first = r < S
    rr, cc, vv = r[first], c[first], v[first]
    toq = cc == Qi
    q = np.zeros(S)
    np.add.at(q, rr[toq], vv[toq])
    rr, cc, vv = rr[~toq], cc[~toq], vv[~toq]
    shift, s = np.divmod(cc, S)
    qrow = r == Qi
    qq = float(v[qrow & (c == Qi)].sum())
    return {"r": rr, "s": s, "shift": shift, "v": vv, "q": q, "qq": qq, "n": n, "S": S}


def factorize_circulant(
    op, precision="single", rtol=1e-12, max_refinements=10, refine=True, residual_op=None
):
    """Factorize a block circulant SPD :class:`LocalOperator`.

    Parameters
    ----------
    op : LocalOperator
        Symmetric positive definite operator on a basis with circulant layout.
    precision : {"single", "double"}
        Precision of the banded Cholesky factors.
    residual_op : callable, optional
        Operator for true residuals; defaults to ``op.matvec``.

    Raises
    ------
    FactorizationError
        If any Fourier block is not positive definite.
    """
    blk = circulant_blocks(op)
    n, S = blk["n"], blk["S"]
    r, s, shift, v = blk["r"], blk["s"], blk["shift"], blk["v"]
    q, qq = blk["q"], blk["qq"]
    cdt = _DTYPES[precision][1]
    upper = s >= r
    r, s, shift, v = r[upper], s[upper], shift[upper], v[upper]
    u = int((s - r).max()) if r.size else 0
    nzq = np.nonzero(q)[0]
    u0 = max(u, S - int(nzq.min())) if nzq.size else u
    nmodes = n // 2 + 1
    factors = []
    for m in range(nmodes):
        phase = np.exp(2j * np.pi * m * shift / n)
        vals = v * phase
        if m == 0:
            size, bw = S + 1, u0
        else:
            size, bw = S, u
        flat = (bw + r - s) * size + s
        ab = (
            np.bincount(flat, vals.real, minlength=(bw + 1) * size)
            + 1j * np.bincount(flat, vals.imag, minlength=(bw + 1) * size)
        ).reshape(bw + 1, size)
        if m == 0:
            ab = ab.real.astype(complex)
            ab[bw - (S - nzq), S] = q[nzq]
            ab[bw, S] = qq / n
        diag = ab[bw].real
        if np.any(diag <= 0):
            raise FactorizationError(f"Fourier block {m} has a nonpositive diagonal")
        d = 1.0 / np.sqrt(diag)
        rows_i = np.arange(size)
        for kk in range(bw + 1):
            off = bw - kk  # ab[kk, j] = A[j - off, j]
            j = rows_i[off:]
            ab[kk, off:] *= d[j - off] * d[j]
        try:
            cb = sla.cholesky_banded(ab.astype(cdt), lower=False, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(f"Fourier block {m} is not positive definite") from exc
        pbtrs = sla.get_lapack_funcs("pbtrs", (cb,))
        factors.append((cb, d, pbtrs))

    def inner(b):
        B = b[: n * S].reshape(n, S)
        Bh = np.fft.rfft(B, axis=0)
        Xh = np.empty_like(Bh)
        for m, (cb, d, pbtrs) in enumerate(factors):
            if m == 0:
                rhs = np.concatenate([Bh[0] / n, [b[n * S] / n]])
            else:
                rhs = Bh[m]
            y, fail = pbtrs(cb, (d * rhs).astype(cdt), lower=0)
            if fail:
                raise FactorizationError(f"banded solve failed for Fourier block {m}")
            y = d * y.astype(complex)
            if m == 0:
                Xh[0] = n * y[:S]
                xq = y[S].real
            else:
                Xh[m] = y
        X = np.fft.irfft(Xh, n=n, axis=0)
        return np.concatenate([X.ravel(), [xq]])

    apply = residual_op if residual_op is not None else op.matvec
    info = {"backend": "circulant", "precision": precision, "bandwidth": u, "modes": nmodes}
    return FactorizedOperator(apply, inner, op.basis.ndofs, rtol, max_refinements, refine, info)

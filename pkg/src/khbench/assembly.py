"""Mass, Stokes and upwind convection operators.

All bilinear forms on the structured mesh have one element matrix shared by
every cell and one facet matrix per facet orientation, so they are stored as
:class:`LocalOperator` objects and applied matrix-free.  Contributions are
reduced with ``np.bincount`` over a fixed, precomputed index order, which
keeps every application bitwise reproducible.  Sparse matrices are produced on
demand for the direct solvers.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _poly
from .fem_space import tabulate_rt


def penalty(k, h, alpha=4.0):
    """Interior penalty ``sigma = alpha (k+1)^2 / h``."""
    return alpha * (k + 1) ** 2 / h


def _facet_sides(basis, npts, nderiv):
    """Tabulations on both sides of vertical and horizontal facets.

    Returns a dict with keys ``right``, ``left``, ``top``, ``bottom``, each of
    shape (2, nd, nloc, npts), and the physical facet weights.
    """
    g, w = _poly.gauss(npts)
    one = np.array([1.0])
    tabs = {
        "right": basis.tabulate(one, g, nderiv),
        "left": basis.tabulate(-one, g, nderiv),
        "top": basis.tabulate(g, one, nderiv),
        "bottom": basis.tabulate(g, -one, nderiv),
    }
    return tabs, w * basis.h / 2.0


class LocalOperator:
    """Translation-invariant bilinear form on a :class:`LocalBasis`.

    Parameters
    ----------
    basis : LocalBasis
    mesh : StructuredMesh
    cell : ndarray, shape (nloc, nloc)
        Element matrix (row = test function).
    vfacet, hfacet : ndarray, shape (2 nloc, 2 nloc), optional
        Facet matrices acting on (owner, neighbor) local coefficients for the
        vertical and interior horizontal facets.
    """

    def __init__(self, basis, mesh, cell, vfacet=None, hfacet=None):
        self.basis = basis
        self.mesh = mesh
        self.cell = np.asarray(cell, dtype=float)
        self.vfacet = vfacet
        self.hfacet = hfacet
        own, nbr = mesh.facet_owner, mesh.facet_neighbor
        vs, hs = mesh.vertical_facets(), mesh.horizontal_facets()
        self._pairs = []
        if vfacet is not None:
            self._pairs.append((own[vs], nbr[vs], vfacet))
        if hfacet is not None and mesh.n > 1:
            self._pairs.append((own[hs], nbr[hs], hfacet))
        dofs = basis.cell_dofs
        idx = [dofs.ravel()]
        for o, nb, _ in self._pairs:
            idx.append(np.hstack([dofs[o], dofs[nb]]).ravel())
        idx = np.concatenate(idx)
        self._scatter = np.where(idx < 0, basis.ndofs, idx)

    @property
    def shape(self):
        return (self.basis.ndofs, self.basis.ndofs)

    def local_products(self, X):
        parts = [(X @ self.cell.T).ravel()]
        for o, nb, F in self._pairs:
            parts.append((np.hstack([X[o], X[nb]]) @ F.T).ravel())
        return np.concatenate(parts)

    def matvec(self, x):
        X = self.basis.gather(x)
        vals = self.local_products(X)
        return np.bincount(self._scatter, vals, minlength=self.basis.ndofs + 1)[:-1]

    __matmul__ = matvec

    def quadratic_form(self, x):
        return float(x @ self.matvec(x))

    def combine(self, other, a=1.0, b=1.0):
        """``a*self + b*other`` on the same basis."""
        if other.basis is not self.basis:
            raise ValueError("operators live on different bases")

        def mix(p, q):
            if p is None and q is None:
                return None
            p = 0.0 if p is None else p
            q = 0.0 if q is None else q
            return a * p + b * q

        return LocalOperator(
            self.basis,
            self.mesh,
            a * self.cell + b * other.cell,
            mix(self.vfacet, other.vfacet),
            mix(self.hfacet, other.hfacet),
        )

    def to_sparse(self, rows=None):
        """Assemble as CSR; ``rows`` optionally restricts to a row mask."""
        dofs = self.basis.cell_dofs
        R, C, V = [], [], []

        def add(rd, cd, A):
            r = np.repeat(rd[:, :, None], cd.shape[1], axis=2)
            c = np.repeat(cd[:, None, :], rd.shape[1], axis=1)
            v = np.broadcast_to(A, r.shape)
            keep = (r >= 0) & (c >= 0)
            if rows is not None:
                keep &= rows[np.where(r >= 0, r, 0)]
            R.append(r[keep])
            C.append(c[keep])
            V.append(v[keep])

        add(dofs, dofs, self.cell)
        for o, nb, F in self._pairs:
            d2 = np.hstack([dofs[o], dofs[nb]])
            add(d2, d2, F)
        n = self.basis.ndofs
        A = sp.coo_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(C))), shape=(n, n))
        return A.tocsr()


# ---------------------------------------------------------------- element forms
def _cell_rule(basis, npts):
    g, w = _poly.gauss(npts)
    W = np.outer(w, w).ravel() * basis.h**2 / 4.0
    return g, W


def mass_operator(basis):
    """Velocity mass form as a :class:`LocalOperator`."""
    g, W = _cell_rule(basis, basis.k + 2)
    T = basis.tabulate(g, g, 0)
    cell = sum((T[c, 0] * W) @ T[c, 0].T for c in range(2))
    return LocalOperator(basis, basis.mesh, cell)


def _sip_facet(sides, wf, pos, neg, dn, sigma):
    """SIP facet matrix for (owner side ``pos``, neighbor side ``neg``)."""
    Vo, Vn = sides[pos][:, 0], sides[neg][:, 0]
    Do, Dn = sides[pos][:, dn], sides[neg][:, dn]
    J = np.concatenate([Vo, -Vn], axis=1)  # (2, 2nloc, nq)
    Av = 0.5 * np.concatenate([Do, Dn], axis=1)
    F = np.zeros((J.shape[1], J.shape[1]))
    for c in range(2):
        Jw = J[c] * wf
        F += sigma * Jw @ J[c].T - (Av[c] * wf) @ J[c].T - Jw @ Av[c].T
    return F


def viscous_operator(basis, nu, alpha=4.0):
    """``nu`` times the symmetric interior penalty form (no wall terms)."""
    k, h = basis.k, basis.h
    g, W = _cell_rule(basis, k + 2)
    T = basis.tabulate(g, g, 1)
    cell = sum((T[c, d] * W) @ T[c, d].T for c in range(2) for d in (1, 2))
    sides, wf = _facet_sides(basis, k + 2, 1)
    sigma = penalty(k, h, alpha)
    Fv = _sip_facet(sides, wf, "right", "left", 1, sigma)
    Fh = _sip_facet(sides, wf, "top", "bottom", 2, sigma)
    return LocalOperator(basis, basis.mesh, nu * cell, nu * Fv, nu * Fh)


@dataclass(eq=False)
class OperatorSet:
    """Mass and viscous operators on one basis plus their quadrature data.

    ``M`` and ``A`` are :class:`LocalOperator` objects; for the mixed
    formulation ``A_full`` holds the sparse Stokes saddle point matrix.
    """

    M: LocalOperator
    A: LocalOperator
    nu: float
    alpha: float
    volume_order: int
    facet_order: int


def build_operators(basis, nu, alpha=4.0):
    M = mass_operator(basis)
    A = viscous_operator(basis, nu, alpha)
    order = 2 * (basis.k + 1) + 1
    return OperatorSet(M, A, nu, alpha, order, order)


# ---------------------------------------------------------------- sparse APIs
def assemble_mass(space):
    """Sparse SPD velocity mass matrix in the RT basis."""
    return mass_operator(space.rt).to_sparse()


def assemble_viscous(space, nu, alpha=4.0):
    return viscous_operator(space.rt, nu, alpha).to_sparse()


def assemble_divergence(space):
    """``D[q, v] = (div v, q)`` with DG Q_k pressure (Legendre basis)."""
    k = space.k
    g, W = _cell_rule(space.rt, k + 2)
    T = tabulate_rt(k, g, g, 1, space.h)
    div = T[0, 1] + T[1, 2]
    Lg = _poly.legendre(k, g)[0]
    P = np.einsum("ix,jy->ijxy", Lg, Lg).reshape((k + 1) ** 2, -1)
    Dloc = (P * W) @ div.T
    rd = np.repeat(space.p_cell_dofs[:, :, None], Dloc.shape[1], 2)
    cd = np.repeat(space.rt.cell_dofs[:, None, :], Dloc.shape[0], 1)
    v = np.broadcast_to(Dloc, rd.shape)
    keep = cd >= 0
    D = sp.coo_matrix((v[keep], (rd[keep], cd[keep])), shape=(space.np_dofs, space.nu_dofs))
    return D.tocsr()


def assemble_pressure_mass(space):
    """Block diagonal DG pressure mass matrix."""
    k = space.k
    d = np.array([2.0 / (2 * i + 1) * 2.0 / (2 * j + 1) for i in range(k + 1) for j in range(k + 1)])
    d *= space.h**2 / 4.0
    return sp.diags(np.tile(d, space.n**2)).tocsr()


def assemble_stokes(space, nu, alpha=4.0):
    """Symmetric Stokes matrix ``[[nu A_visc, -D^T], [-D, 0]]``."""
    Av = assemble_viscous(space, nu, alpha)
    D = assemble_divergence(space)
    return sp.bmat([[Av, -D.T], [-D, None]], format="csr")


def gauge_fixed(space, K):
    """Drop the constant pressure dof of cell 0 from a saddle point matrix.

    The pressure is determined up to a constant (walls are impermeable and x is
    periodic), so one dof is removed to make the system nonsingular.  Returns
    the reduced matrix and the kept index array.
    """
    keep = np.r_[0 : space.nu_dofs, space.nu_dofs + 1 : K.shape[0]]
    K = sp.csr_matrix(K)
    return K[keep][:, keep], keep


def pressure_mean_zero(space, p):
    """Shift DG pressure coefficients so that the pressure has zero mean."""
    npl = (space.k + 1) ** 2
    p = p.copy()
    p[::npl] -= p[::npl].mean()
    return p


# ---------------------------------------------------------------- convection
class ConvectionOperator:
    """Matrix-free upwind convection residual ``c_h(u; u, v)``.

    Parameters
    ----------
    basis : LocalBasis
        Trial and test basis (RT or stream function).
    quad_order : int
        Polynomial degree integrated exactly by the Gauss rules in every
        direction; the default ``3(k+1)`` is exact for the trilinear form.
    """

    def __init__(self, basis, quad_order=None):
        k = basis.k
        if quad_order is None:
            quad_order = 3 * (k + 1)
        if quad_order < 2:
            raise ValueError("quadrature order must be at least 2")
        self.basis = basis
        self.quad_order = int(quad_order)
        npts = _poly.npoints_for_order(quad_order)
        g, W = _cell_rule(basis, npts)
        T = basis.tabulate(g, g, 1)
        nq = W.size
        self._nq = nq
        self._W = W
        # values and first derivatives of both components, stacked column-wise
        self._Tall = np.concatenate(
            [T[0, 0], T[1, 0], T[0, 1], T[0, 2], T[1, 1], T[1, 2]], axis=1
        )
        self._Ttest = np.concatenate([T[0, 0], T[1, 0]], axis=1).T
        sides, self._wf = _facet_sides(basis, npts, 0)
        self._sides = {key: (v[0, 0], v[1, 0]) for key, v in sides.items()}
        mesh = basis.mesh
        own, nbr = mesh.facet_owner, mesh.facet_neighbor
        vs, hs = mesh.vertical_facets(), mesh.horizontal_facets()
        self._facets = [(own[vs], nbr[vs], "right", "left", 0)]
        if mesh.n > 1:
            self._facets.append((own[hs], nbr[hs], "top", "bottom", 1))
        dofs = basis.cell_dofs
        idx = [dofs.ravel()]
        for o, nb, *_ in self._facets:
            idx += [dofs[o].ravel(), dofs[nb].ravel()]
        idx = np.concatenate(idx)
        self._scatter = np.where(idx < 0, basis.ndofs, idx)

    def local_residual(self, X):
        nq = self._nq
        V = X @ self._Tall
        u1, u2, u1x, u1y, u2x, u2y = (V[:, i * nq : (i + 1) * nq] for i in range(6))
        f = np.hstack([(u1 * u1x + u2 * u1y) * self._W, (u1 * u2x + u2 * u2y) * self._W])
        parts = [(f @ self._Ttest).ravel()]
        wf = self._wf
        for o, nb, pos, neg, ncomp in self._facets:
            Po, No = self._sides[pos], self._sides[neg]
            Xo, Xn = X[o], X[nb]
            uo = [Xo @ Po[c] for c in range(2)]
            un_ = [Xn @ No[c] for c in range(2)]
            vn = 0.5 * (uo[ncomp] + un_[ncomp])
            a = np.abs(vn)
            co = 0.5 * (a - vn) * wf
            cn = -0.5 * (a + vn) * wf
            jump = [uo[c] - un_[c] for c in range(2)]
            ro = sum((co * jump[c]) @ Po[c].T for c in range(2))
            rn = sum((cn * jump[c]) @ No[c].T for c in range(2))
            parts += [ro.ravel(), rn.ravel()]
        return np.concatenate(parts)

    def apply(self, x):
        """Global residual vector ``c_h(u; u, phi_i)`` for coefficients ``x``."""
        X = self.basis.gather(x)
        vals = self.local_residual(X)
        return np.bincount(self._scatter, vals, minlength=self.basis.ndofs + 1)[:-1]

    __call__ = apply


def apply_convection(space, u, quad_order=None):
    """Convection residual of a :class:`VelocityField` in the RT basis."""
    return ConvectionOperator(space.rt, quad_order).apply(u.u)

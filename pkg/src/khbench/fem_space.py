"""Raviart-Thomas H(div) DG velocity space on the periodic channel mesh.

Local basis
-----------
On the reference square ``[-1, 1]^2`` the RT_k space Q_{k+1,k} x Q_{k,k+1} is
spanned by::

    u1 functions  phi_a(x) L_m(y),   a = 0..k+1, m = 0..k   (local index a*(k+1)+m)
    u2 functions  L_m(x) phi_b(y),   b = 0..k+1, m = 0..k   (offset (k+2)(k+1))

with ``phi`` the integrated Legendre functions of :mod:`khbench._poly`.  The
coefficients with ``a in {0, 1}`` (``b in {0, 1}``) are normal traces on the
left/right (bottom/top) facet and are shared between neighbors, which makes the
space H(div)-conforming.  Wall normal traces are eliminated (strong
no-penetration).

Stream function basis
---------------------
The discretely divergence-free subspace equals ``curl`` of continuous
Q_{k+1} stream functions that are periodic in x, vanish on the bottom wall and
take one common free value ``Q`` on the top wall (the net flux).  Its dofs are
ordered column by column in x, which makes every translation-invariant
operator block circulant, with ``Q`` appended last.
"""
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

from . import _poly
from .mesh import StructuredMesh

# derivative multi-indices (dx, dy) in tabulation order
DERIVS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
_NDER = {0: 1, 1: 3, 2: 6}


def _rt_tables(k, Lx, Px, Ly, Py, nderiv, outer):
    nd = _NDER[nderiv]
    n1 = (k + 2) * (k + 1)
    shape_q = (Lx.shape[2] * Ly.shape[2],) if outer else (Lx.shape[2],)
    tab = np.zeros((2, nd, 2 * n1) + shape_q)
    for d, (dx, dy) in enumerate(DERIVS[:nd]):
        if outer:
            u1 = np.einsum("ax,my->amxy", Px[dx], Ly[dy]).reshape(n1, -1)
            u2 = np.einsum("mx,by->bmxy", Lx[dx], Py[dy]).reshape(n1, -1)
        else:
            u1 = np.einsum("ap,mp->amp", Px[dx], Ly[dy]).reshape(n1, -1)
            u2 = np.einsum("mp,bp->bmp", Lx[dx], Py[dy]).reshape(n1, -1)
        tab[0, d, :n1] = u1
        tab[1, d, n1:] = u2
    return tab


def tabulate_rt(k, xr, yr, nderiv=0, h=None, outer=True):
    """Tabulate the local RT_k basis.

    Parameters
    ----------
    k : int
    xr, yr : array_like
        Reference coordinates.  With ``outer=True`` the tensor grid is used
        (point index ``ix*len(yr) + iy``), otherwise points are paired.
    nderiv : int
        0, 1 or 2.
    h : float, optional
        Cell size; if given derivatives are scaled to physical ones.

    Returns
    -------
    ndarray, shape (2, nd, nloc, npts)
        Component, derivative (see ``DERIVS``), local function, point.
    """
    nd = max(nderiv, 0)
    Lx = _poly.legendre(k, xr, nd)
    Ly = _poly.legendre(k, yr, nd)
    Px = _poly.integrated_legendre(k + 1, xr, nd)
    Py = _poly.integrated_legendre(k + 1, yr, nd)
    tab = _rt_tables(k, Lx, Px, Ly, Py, nderiv, outer)
    if h is not None:
        s = 2.0 / h
        for d, (dx, dy) in enumerate(DERIVS[: tab.shape[1]]):
            if dx + dy:
                tab[:, d] *= s ** (dx + dy)
    return tab


def curl_local_matrix(k, h):
    """Map local stream function coefficients to local RT coefficients.

    The stream function basis is ``phi_a(x) phi_b(y)`` (index ``a*(k+2)+b``)
    and ``u = (d psi/dy, -d psi/dx)``.
    """
    p = k + 1
    n1 = (k + 2) * (k + 1)
    s = 2.0 / h
    C = np.zeros((2 * n1, (k + 2) ** 2))
    # phi_b' expressed in Legendre: phi_0' = -L0/2, phi_1' = L0/2, phi_b' = L_{b-1}
    dcoef = [(0, -0.5), (0, 0.5)] + [(b - 1, 1.0) for b in range(2, p + 1)]
    for a in range(p + 1):
        for b in range(p + 1):
            col = a * (k + 2) + b
            m, c = dcoef[b]
            C[a * (k + 1) + m, col] += s * c
            m, c = dcoef[a]
            C[n1 + b * (k + 1) + m, col] -= s * c
    return C


@dataclass(eq=False)
class LocalBasis:
    """Element-wise description of a discrete space used by the assembler.

    ``cell_dofs[c, l]`` is the global dof of local function ``l`` on cell
    ``c`` (``-1`` if eliminated).  Local functions are linear combinations of
    the RT functions given by the columns of ``coeff_map``.
    """

    name: str
    k: int
    h: float
    cell_dofs: np.ndarray
    ndofs: int
    coeff_map: np.ndarray
    mesh: StructuredMesh = None
    circulant: tuple = None  # (ncolumns, column size, nextra) if block circulant

    @property
    def nloc(self):
        return self.cell_dofs.shape[1]

    def tabulate(self, xr, yr, nderiv=0, outer=True):
        tab = tabulate_rt(self.k, xr, yr, nderiv, self.h, outer)
        return np.einsum("cdrq,rl->cdlq", tab, self.coeff_map, optimize=True)

    def gather(self, x):
        """Local coefficient array (ncells, nloc) of a global vector."""
        xe = np.append(x, 0.0)
        return xe[self.cell_dofs]


def _rt_numbering(n, k):
    p = k + 1
    nb = k * (k + 1)
    n1 = (k + 2) * (k + 1)
    off_h = n * n * p
    off_int = off_h + n * (n - 1) * p
    ndofs = off_int + n * n * 2 * nb
    jj, ii = np.divmod(np.arange(n * n), n)
    m = np.arange(p)
    dofs = np.empty((n * n, 2 * n1), dtype=np.int64)
    cell = np.arange(n * n)[:, None]
    for a in range(k + 2):
        sl = slice(a * p, (a + 1) * p)
        if a == 0:
            dofs[:, sl] = (jj * n + ii)[:, None] * p + m
        elif a == 1:
            dofs[:, sl] = (jj * n + (ii + 1) % n)[:, None] * p + m
        else:
            dofs[:, sl] = off_int + cell * 2 * nb + (a - 2) * p + m
    for b in range(k + 2):
        sl = slice(n1 + b * p, n1 + (b + 1) * p)
        if b == 0:
            g = off_h + ((jj - 1) * n + ii)[:, None] * p + m
            dofs[:, sl] = np.where((jj == 0)[:, None], -1, g)
        elif b == 1:
            g = off_h + (jj * n + ii)[:, None] * p + m
            dofs[:, sl] = np.where((jj == n - 1)[:, None], -1, g)
        else:
            dofs[:, sl] = off_int + cell * 2 * nb + nb + (b - 2) * p + m
    return dofs, ndofs


def _psi_numbering(n, k):
    """Column-major stream function numbering (see module docstring)."""
    S = k * (k + 1) + (n - 1) * (k + 1) ** 2

    def off(j):
        return np.where(j == 0, 0, k * (k + 1) + (j - 1) * (k + 1) ** 2)

    Q = n * S
    jj, ii = np.divmod(np.arange(n * n), n)
    nl = (k + 2) ** 2
    dofs = np.empty((n * n, nl), dtype=np.int64)
    for a in range(k + 2):
        for b in range(k + 2):
            col = a * (k + 2) + b
            if a < 2 and b < 2:
                jv = jj + b
                iv = (ii + a) % n
                g = iv * S + off(np.minimum(jv, n - 1))
                g = np.where(jv == n, Q, g)
                g = np.where(jv == 0, -1, g)
            elif a < 2:
                iv = (ii + a) % n
                g = iv * S + off(jj) + np.where(jj >= 1, 1 + k, 0) + (b - 2)
            elif b < 2:
                jh = jj + b
                g = ii * S + off(np.clip(jh, 0, n - 1)) + 1 + (a - 2)
                g = np.where((jh == 0) | (jh == n), -1, g)
            else:
                g = ii * S + off(jj) + np.where(jj >= 1, 1 + 2 * k, k) + (a - 2) * k + (b - 2)
            dofs[:, col] = g
    return dofs, Q + 1, S


class VelocitySpace:
    """RT_k velocity space with DG Q_k pressure on a :class:`StructuredMesh`.

    Parameters
    ----------
    mesh : StructuredMesh
    k : int
        Velocity order, ``1 <= k <= 8``.

    Attributes
    ----------
    nu_dofs, np_dofs : int
        Velocity dofs after periodic identification and wall elimination,
        and pressure dofs.
    rt : LocalBasis
        Full RT basis.
    stream : LocalBasis
        Stream function basis of the divergence-free subspace.
    curl : scipy.sparse.csr_matrix
        Global map from stream function to RT coefficients.
    """

    def __init__(self, mesh: StructuredMesh, k: int):
        if int(k) != k or not 1 <= k <= 8:
            raise ValueError(f"velocity order must be in 1..8, got {k!r}")
        self.mesh = mesh
        self.k = k = int(k)
        self.n = n = mesh.n
        self.h = mesh.h
        rt_dofs, self.nu_dofs = _rt_numbering(n, k)
        self.rt = LocalBasis("rt", k, self.h, rt_dofs, self.nu_dofs, np.eye(rt_dofs.shape[1]), mesh)
        psi_dofs, npsi, S = _psi_numbering(n, k)
        self.curl_local = curl_local_matrix(k, self.h)
        self.stream = LocalBasis(
            "stream", k, self.h, psi_dofs, npsi, self.curl_local, mesh, circulant=(n, S, 1)
        )
        npl = (k + 1) ** 2
        self.p_cell_dofs = np.arange(n * n * npl).reshape(n * n, npl)
        self.np_dofs = n * n * npl
        self.curl = self._build_curl()
        for arr in (rt_dofs, psi_dofs, self.p_cell_dofs):
            arr.setflags(write=False)

    def _build_curl(self):
        dofs = self.rt.cell_dofs.ravel()
        first = np.unique(dofs, return_index=True)[1]
        first = first[dofs[first] >= 0]
        cells, loc = np.divmod(first, self.rt.nloc)
        rows, cols, vals = [], [], []
        C = self.curl_local
        psi = self.stream.cell_dofs
        for r_loc in range(C.shape[0]):
            sel = loc == r_loc
            if not sel.any():
                continue
            nz = np.nonzero(C[r_loc])[0]
            for l in nz:
                g = psi[cells[sel], l]
                keep = g >= 0
                rows.append(dofs[first[sel]][keep])
                cols.append(g[keep])
                vals.append(np.full(keep.sum(), C[r_loc, l]))
        G = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.nu_dofs, self.stream.ndofs),
        )
        return G.tocsr()

    # ------------------------------------------------------------------ counts
    def paper_dof_count(self):
        """Velocity dofs counted per facet before periodic identification
        plus the divergence-free interior dofs of every cell."""
        n, k = self.n, self.k
        facet = 2 * n * (n + 1) * (k + 1)
        interior = n * n * (2 * k * (k + 1) - ((k + 1) ** 2 - 1))
        return facet + interior

    def paper_pressure_dof_count(self):
        """One constant per cell (the divergence-free reduced pressure)."""
        return self.n * self.n

    # ------------------------------------------------------------- utilities
    def local_coefficients(self, u):
        """RT coefficients per cell, shape (ncells, 2(k+1)(k+2))."""
        return self.rt.gather(u)

    def zero_field(self, t=0.0):
        return VelocityField(self, np.zeros(self.nu_dofs), np.zeros(self.np_dofs), t)


def build_space(mesh, k):
    """Construct the RT_k / DG Q_k pair on ``mesh``."""
    return VelocitySpace(mesh, k)


@dataclass(eq=False)
class VelocityField:
    """Velocity (RT coefficients) and pressure (Legendre coefficients per cell)."""

    space: VelocitySpace
    u: np.ndarray
    p: np.ndarray = None
    t: float = 0.0
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.p is None:
            self.p = np.zeros(self.space.np_dofs)

    def local(self):
        return self.space.local_coefficients(self.u)

    def copy(self):
        return VelocityField(self.space, self.u.copy(), self.p.copy(), self.t, dict(self.meta))


def field_from_stream(space, psi, t=0.0):
    """Velocity field ``curl psi`` for stream function coefficients ``psi``."""
    return VelocityField(space, space.curl @ psi, None, t)


# ------------------------------------------------------------------ projection
def _cell_quadrature(space, npts):
    xg, wg = _poly.gauss(npts)
    h = space.h
    X, Y = np.meshgrid(xg, xg, indexing="ij")
    W = np.outer(wg, wg).ravel() * h * h / 4.0
    jj, ii = np.divmod(np.arange(space.n ** 2), space.n)
    px = (ii[:, None] + 0.5 * (X.ravel()[None, :] + 1.0)) * h
    py = (jj[:, None] + 0.5 * (Y.ravel()[None, :] + 1.0)) * h
    return xg, W, px, py


def load_vector(space, func, basis=None, npts=None):
    """Assemble ``(f, v)`` for all functions of ``basis`` (default RT)."""
    basis = space.rt if basis is None else basis
    npts = npts or space.k + 6
    xg, W, px, py = _cell_quadrature(space, npts)
    f1, f2 = func(px, py)
    f1 = np.broadcast_to(f1, px.shape)
    f2 = np.broadcast_to(f2, px.shape)
    tab = basis.tabulate(xg, xg, 0)
    bl = (f1 * W) @ tab[0, 0].T + (f2 * W) @ tab[1, 0].T
    idx = basis.cell_dofs.ravel()
    keep = idx >= 0
    return np.bincount(idx[keep], bl.ravel()[keep], minlength=basis.ndofs)


def project_initial_condition(space, func, method="stream", rtol=1e-12):
    """L2 projection of a divergence-free analytic velocity onto the
    discretely divergence-free subspace.

    Parameters
    ----------
    space : VelocitySpace
    func : callable
        ``func(x, y) -> (u1, u2)`` on arrays.
    method : {"stream", "mixed"}
        ``"stream"`` solves the SPD system in the stream function basis;
        ``"mixed"`` solves the saddle point problem with a pressure
        multiplier.  Both give the same velocity up to solver tolerance.

    Returns
    -------
    VelocityField
    """
    from . import assembly, linalg

    if method == "stream":
        b = load_vector(space, func, space.stream)
        M = assembly.mass_operator(space.stream)
        op = linalg.factorize_circulant(M, precision="double", rtol=rtol)
        psi, info = linalg.solve_refined(op, b)
        fld = field_from_stream(space, psi)
        fld.meta["stream"] = psi
        fld.meta["refinements"] = info.refinements
        return fld
    if method == "mixed":
        b = load_vector(space, func)
        M = assembly.assemble_mass(space)
        D = assembly.assemble_divergence(space)
        K, keep = assembly.gauge_fixed(space, sp.bmat([[M, -D.T], [-D, None]]))
        rhs = np.concatenate([b, np.zeros(space.np_dofs)])[keep]
        op = linalg.factorize(K, method="indefinite", rtol=rtol)
        y, info = linalg.solve_refined(op, rhs)
        x = np.zeros(space.nu_dofs + space.np_dofs)
        x[keep] = y
        p = assembly.pressure_mean_zero(space, x[space.nu_dofs :])
        fld = VelocityField(space, x[: space.nu_dofs], p)
        fld.meta["refinements"] = info.refinements
        return fld
    raise ValueError(f"unknown projection method {method!r}")


# ------------------------------------------------------------------ evaluation
def evaluate(field, points, nderiv=0, chunk=20000):
    """Pointwise values of the piecewise polynomial velocity.

    Parameters
    ----------
    field : VelocityField
    points : array_like, shape (npts, 2)
    nderiv : int
        If > 0, derivatives are returned as well.

    Returns
    -------
    ndarray
        Shape (npts, 2) for ``nderiv=0``, otherwise (npts, 2, nd) with the
        derivative axis ordered as ``DERIVS``.
    """
    space = field.space
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    i, j, xr, yr = space.mesh.locate(pts[:, 0], pts[:, 1])
    cells = j * space.n + i
    U = field.local()
    nd = _NDER[nderiv]
    out = np.empty((pts.shape[0], 2, nd))
    for s in range(0, pts.shape[0], chunk):
        sl = slice(s, s + chunk)
        tab = tabulate_rt(space.k, xr[sl], yr[sl], nderiv, space.h, outer=False)
        out[sl] = np.einsum("cdrp,pr->pcd", tab, U[cells[sl]])
    return out[:, :, 0] if nderiv == 0 else out


def _separable_terms(space, U, what):
    """Separable representation ``sum_(a,b) c[cell,a,b] X_a(x) Y_b(y)``.

    Returns a list of ``(coef, xfun, yfun)`` with ``coef`` of shape
    (ncells, A, B) and ``xfun``/``yfun`` (family, derivative) descriptors.
    """
    k = space.k
    n1 = (k + 2) * (k + 1)
    c1 = U[:, :n1].reshape(-1, k + 2, k + 1)  # phi_a(x) L_m(y)
    c2 = U[:, n1:].reshape(-1, k + 2, k + 1).transpose(0, 2, 1)  # L_m(x) phi_b(y)
    u1 = lambda dx, dy, sgn=1.0: (sgn * c1, ("P", dx), ("L", dy))
    u2 = lambda dx, dy, sgn=1.0: (sgn * c2, ("L", dx), ("P", dy))
    table = {
        "u1": [u1(0, 0)],
        "u2": [u2(0, 0)],
        "omega": [u2(1, 0), u1(0, 1, -1.0)],
        "omega_x": [u2(2, 0), u1(1, 1, -1.0)],
        "omega_y": [u2(1, 1), u1(0, 2, -1.0)],
        "div": [u1(1, 0), u2(0, 1)],
    }
    return table[what]


def grid_values(field, xs, ys, what="u1"):
    """Evaluate a quantity on the tensor grid ``xs`` x ``ys``.

    ``what`` is one of ``u1``, ``u2``, ``omega``, ``omega_x``, ``omega_y``
    and ``div``; derivatives are broken (element-wise).

    Returns
    -------
    ndarray, shape (len(xs), len(ys))
    """
    space = field.space
    n, k, h = space.n, space.k, space.h
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ix, _, xr, _ = space.mesh.locate(xs, np.zeros_like(xs))
    _, jy, _, yr = space.mesh.locate(np.zeros_like(ys), ys)
    s = 2.0 / h
    fam_x = {"L": _poly.legendre(k, xr, 2), "P": _poly.integrated_legendre(k + 1, xr, 2)}
    fam_y = {"L": _poly.legendre(k, yr, 2), "P": _poly.integrated_legendre(k + 1, yr, 2)}
    U = field.local()
    out = np.zeros((xs.size, ys.size))
    for coef, (fx, dx), (fy, dy) in _separable_terms(space, U, what):
        X = fam_x[fx][dx] * s**dx
        Y = fam_y[fy][dy] * s**dy
        coef = coef.reshape(n, n, coef.shape[1], coef.shape[2])  # (j, i, a, b)
        for j in range(n):
            sel = np.nonzero(jy == j)[0]
            if sel.size == 0:
                continue
            T = np.einsum("iab,by->iay", coef[j], Y[:, sel])
            out[:, sel] += np.einsum("xay,ax->xy", T[ix], X)
    return out


def x_mean_profile(field, ys, what="u1"):
    """Exact x-average of a quantity along the horizontal lines ``ys``.

    The x-integral is done cell by cell with a Gauss rule that is exact for
    the polynomial degree involved.
    """
    space = field.space
    n, k, h = space.n, space.k, space.h
    ys = np.asarray(ys, dtype=float)
    _, jy, _, yr = space.mesh.locate(np.zeros_like(ys), ys)
    g, w = _poly.gauss(k + 2)
    s = 2.0 / h
    fam_y = {"L": _poly.legendre(k, yr, 2), "P": _poly.integrated_legendre(k + 1, yr, 2)}
    fam_x = {"L": _poly.legendre(k, g, 2), "P": _poly.integrated_legendre(k + 1, g, 2)}
    out = np.zeros(ys.size)
    U = field.local()
    for coef, (fx, dx), (fy, dy) in _separable_terms(space, U, what):
        ix = fam_x[fx][dx] @ w * (h / 2.0) * s**dx  # integral over one cell
        Y = fam_y[fy][dy] * s**dy
        coef = coef.reshape(n, n, coef.shape[1], coef.shape[2]).sum(axis=1)  # sum over columns
        row = np.einsum("jab,a->jb", coef, ix)
        out += np.einsum("yb,by->y", row[jy], Y)
    return out


class BrokenField:
    """Element-wise derivative of a velocity field, evaluated lazily."""

    def __init__(self, field, components):
        self.field = field
        self.components = tuple(components)

    def on_grid(self, xs, ys):
        vals = [grid_values(self.field, xs, ys, c) for c in self.components]
        return vals[0] if len(vals) == 1 else np.stack(vals)

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = evaluate(self.field, pts, nderiv=2)
        comp = {
            "omega": d[:, 1, 1] - d[:, 0, 2],
            "omega_x": d[:, 1, 3] - d[:, 0, 4],
            "omega_y": d[:, 1, 4] - d[:, 0, 5],
        }
        vals = [comp[c] for c in self.components]
        return vals[0] if len(vals) == 1 else np.stack(vals, -1)

    def cell_values(self, npts=None):
        """Values at Gauss points of every cell and the matching weights."""
        space = self.field.space
        npts = npts or space.k + 2
        xg, wg = _poly.gauss(npts)
        tab = tabulate_rt(space.k, xg, xg, 2, space.h)
        U = self.field.local()
        d = {
            "omega": (1, 1, 0, 2),
            "omega_x": (1, 3, 0, 4),
            "omega_y": (1, 4, 0, 5),
        }
        vals = []
        for c in self.components:
            c2, d2, c1, d1 = d[c]
            vals.append(U @ (tab[c2, d2] - tab[c1, d1]))
        W = np.outer(wg, wg).ravel() * space.h**2 / 4.0
        return vals, W

    def norm_squared(self, npts=None):
        """Sum over components of the squared broken L2 norm."""
        vals, W = self.cell_values(npts)
        return float(sum(np.sum((v * v) @ W) for v in vals))


def broken_curl(field):
    """Scalar element-wise vorticity ``d u2/dx - d u1/dy``."""
    return BrokenField(field, ("omega",))


def broken_grad_curl(field):
    """Element-wise gradient of the vorticity."""
    return BrokenField(field, ("omega_x", "omega_y"))


def divergence_norms(field, npts=None):
    """Element-wise L2 norm of ``div u``."""
    space = field.space
    npts = npts or space.k + 2
    xg, wg = _poly.gauss(npts)
    tab = tabulate_rt(space.k, xg, xg, 1, space.h)
    div = field.local() @ (tab[0, 1] + tab[1, 2])
    W = np.outer(wg, wg).ravel() * space.h**2 / 4.0
    return np.sqrt((div * div) @ W)


def velocity_l2_norm(field, npts=None):
    space = field.space
    npts = npts or space.k + 2
    xg, wg = _poly.gauss(npts)
    tab = tabulate_rt(space.k, xg, xg, 0, space.h)
    U = field.local()
    W = np.outer(wg, wg).ravel() * space.h**2 / 4.0
    v1 = U @ tab[0, 0]
    v2 = U @ tab[1, 0]
    return float(np.sqrt(np.sum((v1 * v1 + v2 * v2) @ W)))


def l2_error(field, func, npts=None):
    """L2 norm of ``u_h - func`` by Gauss quadrature."""
    space = field.space
    npts = npts or space.k + 6
    xg, W, px, py = _cell_quadrature(space, npts)
    tab = tabulate_rt(space.k, xg, xg, 0, space.h)
    U = field.local()
    f1, f2 = func(px, py)
    e1 = U @ tab[0, 0] - f1
    e2 = U @ tab[1, 0] - f2
    return float(np.sqrt(np.sum((e1 * e1 + e2 * e2) * W)))


def normal_jumps(field, npts=None):
    """Largest jump of the normal velocity across interior/periodic facets."""
    space = field.space
    k = space.k
    npts = npts or k + 2
    xg, _ = _poly.gauss(npts)
    one = np.array([1.0])
    U = field.local()
    n = space.n
    right = tabulate_rt(k, one, xg)[0, 0]
    left = tabulate_rt(k, -one, xg)[0, 0]
    top = tabulate_rt(k, xg, one)[1, 0]
    bot = tabulate_rt(k, xg, -one)[1, 0]
    vf = slice(0, n * n)
    hf = space.mesh.horizontal_facets()
    own, nbr = space.mesh.facet_owner, space.mesh.facet_neighbor
    jv = U[own[vf]] @ right - U[nbr[vf]] @ left
    jh = U[own[hf]] @ top - U[nbr[hf]] @ bot if n > 1 else np.zeros(1)
    return float(max(np.abs(jv).max(), np.abs(jh).max()))


def wall_normal_values(field, npts=None):
    """Largest |u.n| at wall quadrature points."""
    space = field.space
    k, n = space.k, space.n
    xg, _ = _poly.gauss(npts or k + 2)
    one = np.array([1.0])
    U = field.local()
    top = U[(n - 1) * n :] @ tabulate_rt(k, xg, one)[1, 0]
    bot = U[:n] @ tabulate_rt(k, xg, -one)[1, 0]
    return float(max(np.abs(top).max(), np.abs(bot).max()))

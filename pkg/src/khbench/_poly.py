"""One-dimensional polynomial bases and Gauss rules on the reference interval [-1, 1].

Two families are used by the element code:

* Legendre polynomials ``L_m``, orthogonal on [-1, 1].
* Integrated Legendre (hierarchical H1) functions::

      phi_0 = (1 - s) / 2,   phi_1 = (1 + s) / 2,
      phi_a = (L_a - L_{a-2}) / (2a - 1),   a >= 2,

  so that ``phi_a' = L_{a-1}`` and ``phi_a(+-1) = 0`` for ``a >= 2``.
"""
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg


@lru_cache(maxsize=None)
def _gauss(npts):
    x, w = npleg.leggauss(npts)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss(npts):
    """Gauss-Legendre points and weights on [-1, 1] (exact to degree 2*npts-1)."""
    if npts < 1:
        raise ValueError("need at least one Gauss point")
    return _gauss(int(npts))


def npoints_for_order(order):
    """Smallest number of Gauss points integrating degree ``order`` exactly."""
    return int(order) // 2 + 1


def legendre(kmax, s, nderiv=0):
    """Legendre polynomials and derivatives.

    Parameters
    ----------
    kmax : int
        Highest degree.
    s : array_like
        Points in [-1, 1].
    nderiv : int
        Highest derivative order.

    Returns
    -------
    ndarray, shape (nderiv+1, kmax+1, len(s))
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros((nderiv + 1, kmax + 1, s.size))
    eye = np.eye(kmax + 1)
    for m in range(kmax + 1):
        c = eye[m]
        for d in range(nderiv + 1):
            out[d, m] = npleg.legval(s, npleg.legder(c, d) if d else c)
    return out


def integrated_legendre(p, s, nderiv=0):
    """Hierarchical H1 functions ``phi_0..phi_p`` and derivatives.

    Returns
    -------
    ndarray, shape (nderiv+1, p+1, len(s))
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    L = legendre(max(p, 1), s, nderiv)
    out = np.zeros((nderiv + 1, p + 1, s.size))
    out[0, 0] = 0.5 * (1.0 - s)
    out[0, 1] = 0.5 * (1.0 + s)
    if nderiv >= 1:
        out[1, 0] = -0.5
        out[1, 1] = 0.5
    for a in range(2, p + 1):
        out[:, a] = (L[:, a] - L[:, a - 2]) / (2 * a - 1)
    return out

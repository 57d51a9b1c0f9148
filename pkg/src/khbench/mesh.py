"""Structured quadrilateral meshes of the unit square, periodic in x.

Cells are numbered lexicographically, ``c = j*n + i`` with ``i`` the column
(x) and ``j`` the row (y).  After periodic identification there are
``2n^2 + n`` facets, stored in this order:

1. vertical facets ``f = j*n + i`` on the line ``x = i*h`` (periodic pair at
   ``i = 0``); owner is the cell on the left, neighbor the cell on the right,
   normal ``(+1, 0)``;
2. interior horizontal facets ``f = n^2 + (j-1)*n + i`` on ``y = j*h`` for
   ``j = 1..n-1``; owner below, neighbor above, normal ``(0, +1)``;
3. wall facets, first the ``n`` bottom ones then the ``n`` top ones, with the
   outward normal and neighbor ``-1``.

The owner-side normal therefore always points from the owner into the
neighbor.
"""
from dataclasses import dataclass

import numpy as np

BOTTOM = "bottom"
TOP = "top"


@dataclass(frozen=True, eq=False)
class StructuredMesh:
    """Immutable n-by-n periodic channel mesh.

    Attributes
    ----------
    n : int
        Cells per side.
    h : float
        Cell size ``1/n``.
    vertices : ndarray, shape (ncells, 4, 2)
        Cell corners (counter-clockwise from lower left).
    facet_owner, facet_neighbor : ndarray of int
        Owner cell and neighbor cell per facet, neighbor ``-1`` on walls.
    facet_normal : ndarray, shape (nfacets, 2)
        Unit normal seen from the owner.
    facet_length : ndarray
    facet_tag : tuple of str
        ``"interior"``, ``"periodic"``, ``"bottom"`` or ``"top"``.
    periodic_pairs : ndarray, shape (n, 2)
        For each row, the (left-boundary cell, right-boundary cell) pair
        joined by the identified facet.
    """

    n: int
    h: float
    vertices: np.ndarray
    facet_owner: np.ndarray
    facet_neighbor: np.ndarray
    facet_normal: np.ndarray
    facet_length: np.ndarray
    facet_tag: tuple
    periodic_pairs: np.ndarray

    @property
    def ncells(self):
        return self.n * self.n

    @property
    def nfacets(self):
        return self.facet_owner.size

    def cell_index(self, i, j):
        return j * self.n + i

    def vertical_facets(self):
        """Slice of the vertical (interior and periodic) facets."""
        return slice(0, self.n * self.n)

    def horizontal_facets(self):
        """Slice of the interior horizontal facets."""
        return slice(self.n * self.n, self.n * self.n + self.n * (self.n - 1))

    def wall_facets(self, tag=None):
        start = self.n * self.n + self.n * (self.n - 1)
        if tag == BOTTOM:
            return slice(start, start + self.n)
        if tag == TOP:
            return slice(start + self.n, start + 2 * self.n)
        return slice(start, start + 2 * self.n)

    def locate(self, x, y):
        """Cell column/row and reference coordinates in [-1, 1] of points."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xm = np.mod(x, 1.0)
        i = np.minimum((xm * self.n).astype(int), self.n - 1)
        j = np.clip((y * self.n).astype(int), 0, self.n - 1)
        xr = 2.0 * (xm * self.n - i) - 1.0
        yr = 2.0 * (y * self.n - j) - 1.0
        return i, j, xr, yr


def build_quad_mesh(n):
    """Build the n-by-n periodic channel mesh of the unit square.

    Parameters
    ----------
    n : int
        Cells per side, ``n >= 1``.

    Returns
    -------
    StructuredMesh
    """
    if int(n) != n or n < 1:
        raise ValueError(f"mesh size must be a positive integer, got {n!r}")
    n = int(n)
    h = 1.0 / n
    jj, ii = np.divmod(np.arange(n * n), n)
    x0 = ii * h
    y0 = jj * h
    vertices = np.stack(
        [
            np.stack([x0, y0], -1),
            np.stack([x0 + h, y0], -1),
            np.stack([x0 + h, y0 + h], -1),
            np.stack([x0, y0 + h], -1),
        ],
        axis=1,
    )

    # vertical facets on x = i*h, owner on the left (periodic wrap at i = 0)
    v_nbr = jj * n + ii
    v_own = jj * n + (ii - 1) % n
    # interior horizontal facets on y = j*h, j = 1..n-1
    hj, hi = np.divmod(np.arange(n * (n - 1)), n)
    h_own = hj * n + hi
    h_nbr = (hj + 1) * n + hi
    bot = np.arange(n)
    top = (n - 1) * n + np.arange(n)

    owner = np.concatenate([v_own, h_own, bot, top])
    neighbor = np.concatenate([v_nbr, h_nbr, -np.ones(2 * n, dtype=int)])
    normal = np.concatenate(
        [
            np.tile([1.0, 0.0], (n * n, 1)),
            np.tile([0.0, 1.0], (n * (n - 1), 1)),
            np.tile([0.0, -1.0], (n, 1)),
            np.tile([0.0, 1.0], (n, 1)),
        ]
    )
    tags = (
        tuple("periodic" if i == 0 else "interior" for i in ii)
        + ("interior",) * (n * (n - 1))
        + (BOTTOM,) * n
        + (TOP,) * n
    )
    length = np.full(owner.size, h)
    pairs = np.stack([np.arange(n) * n, np.arange(n) * n + n - 1], -1)
    for arr in (vertices, owner, neighbor, normal, length, pairs):
        arr.setflags(write=False)
    return StructuredMesh(n, h, vertices, owner, neighbor, normal, length, tags, pairs)

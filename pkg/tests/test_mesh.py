import numpy as np
import pytest

from khbench.mesh import build_quad_mesh


@pytest.mark.parametrize("n, ncells, nfacets", [(1, 1, 3), (2, 4, 10), (16, 256, 528)])
def test_counts(n, ncells, nfacets):
    m = build_quad_mesh(n)
    assert m.ncells == ncells
    assert m.nfacets == nfacets == 2 * n * n + n


def test_n1_facets():
    m = build_quad_mesh(1)
    assert list(m.facet_tag) == ["periodic", "bottom", "top"]
    assert m.facet_owner[0] == m.facet_neighbor[0] == 0


def test_large_mesh_cell_count():
    assert build_quad_mesh(256).ncells == 65536


def test_invalid_n():
    with pytest.raises(ValueError):
        build_quad_mesh(0)
    with pytest.raises(ValueError):
        build_quad_mesh(2.5)


def test_normals_and_lengths():
    m = build_quad_mesh(4)
    assert np.allclose(m.facet_length, 0.25)
    v = m.vertical_facets()
    assert np.allclose(m.facet_normal[v], [1.0, 0.0])
    bottom = m.wall_facets("bottom")
    top = m.wall_facets("top")
    assert np.allclose(m.facet_normal[bottom], [0.0, -1.0])
    assert np.allclose(m.facet_normal[top], [0.0, 1.0])
    assert bottom.stop - bottom.start == top.stop - top.start == 4


def test_periodic_neighbors():
    m = build_quad_mesh(4)
    v = m.vertical_facets()
    owner, nb = m.facet_owner[v], m.facet_neighbor[v]
    # owner is the left cell, wrapping around in x
    assert np.all((owner + 1) % 4 == nb % 4)
    assert np.all(owner // 4 == nb // 4) or np.all(owner % 4 == nb % 4)


def test_locate():
    m = build_quad_mesh(4)
    i, j, xr, yr = m.locate(np.array([0.3, 1.0]), np.array([0.6, 1.0]))
    assert (i[0], j[0]) == (1, 2)
    # reference coordinates live in [-1, 1]
    assert np.allclose([xr[0], yr[0]], [-0.6, -0.2])
    # the top wall and x = 1 belong to the last cell in y and the first in x
    assert j[1] == 3


def test_immutable():
    m = build_quad_mesh(2)
    with pytest.raises(Exception):
        m.n = 3
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 1.0

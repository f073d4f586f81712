import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cablesoup.lattice import (BoxSpec, CapacityError, build_box, build_path, domain_from_dict,
                               from_points, neighbors)


def enumerate_box(d, N):
    """Brute-force interior, boundary and edge sets of [-N, N]^d."""
    interior = set(itertools.product(range(-N, N + 1), repeat=d))
    boundary = set()
    edges = set()
    for p in interior:
        for a in range(d):
            for s in (-1, 1):
                q = list(p)
                q[a] += s
                q = tuple(q)
                if q not in interior:
                    boundary.add(q)
                edges.add(frozenset((p, q)))
    return interior, boundary, edges


def test_box_d1_n1():
    dom = build_box(BoxSpec(1, 1))
    assert dom.points.ravel().tolist() == [-1, 0, 1]
    assert sorted(dom.boundary.ravel().tolist()) == [-2, 2]
    assert dom.n_edges == 4


def test_box_d7_n3_vertex_count():
    assert BoxSpec(7, 3).n_vertices == 823543
    dom = build_box(BoxSpec(7, 3))
    assert dom.n == 7 ** 7


def test_box_d2_n2_against_enumeration():
    interior, boundary, edges = enumerate_box(2, 2)
    dom = build_box(BoxSpec(2, 2))
    assert dom.n == len(interior) == 25
    assert len(dom.boundary) == len(boundary) == 20
    assert dom.n_edges == len(edges) == 60
    assert dom.inner_edges.size == 40


@pytest.mark.parametrize("d,N", [(1, 2), (2, 1), (2, 3), (3, 1), (3, 2)])
def test_edges_match_enumeration(d, N):
    _, boundary, edges = enumerate_box(d, N)
    dom = build_box(BoxSpec(d, N))
    assert {tuple(b) for b in dom.boundary.tolist()} == boundary
    assert dom.n_edges == len(edges)
    assert len({tuple(e) for e in dom.edges.tolist()}) <= dom.n_edges


def test_edge_order_is_lexicographic():
    dom = build_box(BoxSpec(2, 2))
    keys = []
    for (u, v), a in zip(dom.edges, dom.edge_axis):
        if u < dom.n:
            lower = dom.point(u)
        else:
            up = list(dom.point(v))
            up[a] -= 1
            lower = tuple(up)
        keys.append(lower + (int(a),))
    assert keys == sorted(keys)


def test_capacity_error():
    with pytest.raises(CapacityError):
        build_box(BoxSpec(7, 3), vertex_budget=1000)


def test_invalid_spec():
    with pytest.raises(ValueError):
        BoxSpec(0, 2)
    with pytest.raises(ValueError):
        BoxSpec(2, 0)


@pytest.mark.parametrize("k,edges", [(1, 2), (2, 3), (3, 4)])
def test_paths(k, edges):
    dom = build_path(k)
    assert dom.points.ravel().tolist() == list(range(1, k + 1))
    assert sorted(dom.boundary.ravel().tolist()) == [0, k + 1]
    assert dom.n_edges == edges


def test_neighbors_examples():
    box = build_box(BoxSpec(2, 1))
    center = box.index((0, 0))
    nb = neighbors(box, center)
    assert len(nb) == 4 and all(w < box.n for w, _ in nb)

    path = build_path(2)
    nb = neighbors(path, path.index((1,)))
    assert sorted(w for w, _ in nb) == [path.index((2,)), path.sink]

    cube = build_box(BoxSpec(3, 1))
    nb = neighbors(cube, cube.index((1, 1, 1)))
    assert sum(w == cube.sink for w, _ in nb) == 3
    assert sum(w < cube.n for w, _ in nb) == 3

    with pytest.raises(KeyError):
        neighbors(path, 5)


def test_neighbor_edges_consistent():
    dom = build_box(BoxSpec(3, 2))
    for v in range(dom.n):
        for w, e in neighbors(dom, v):
            u0, u1 = dom.edges[e]
            assert {u0, u1} == {v, w}


@settings(max_examples=25, deadline=None)
@given(d=st.integers(1, 3), N=st.integers(1, 3))
def test_degree_sum_and_connectivity(d, N):
    dom = build_box(BoxSpec(d, N))
    nbr = dom.neighbor_table
    assert nbr.shape == (dom.n, 2 * d)
    inner = dom.inner_edges.size
    outer = dom.n_edges - inner
    assert nbr.size == 2 * inner + outer
    assert dom.is_connected()
    ids = np.arange(dom.n)
    assert np.array_equal(dom.lookup(dom.points), ids)
    assert all(dom.index(dom.point(i)) == i for i in range(0, dom.n, max(1, dom.n // 17)))


def test_boundary_disjoint_from_interior():
    dom = build_box(BoxSpec(3, 2))
    assert np.all(dom.lookup(dom.boundary) < 0)


def test_from_points_requires_connected():
    from_points([[0, 0], [0, 1], [1, 1]])
    with pytest.raises(ValueError):
        from_points([[0, 0], [2, 0]])


def test_domain_round_trip():
    for dom in (build_box(BoxSpec(2, 3)), build_path(3), from_points([[0, 0], [1, 0]])):
        again = domain_from_dict(dom.to_dict())
        assert np.array_equal(again.points, dom.points)

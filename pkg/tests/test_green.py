import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numba import njit

from cablesoup.green import (CorruptGreenTable, GreenTable, arcsin_law, connection_probability,
                             connection_ratio, green_box_column, green_box_spectral, green_solve,
                             twopoint_decay_profile)
from cablesoup.lattice import BoxSpec, build_box, build_path, from_points

# lattice Green's function of Z^3 at the origin (Watson's integral)
WATSON_G3 = 1.516386059151978


def test_path2_hand_inverse():
    G = GreenTable(build_path(2))
    # (I - P) = [[1, -1/2], [-1/2, 1]], inverse by hand
    assert np.allclose(G.matrix, [[4 / 3, 2 / 3], [2 / 3, 4 / 3]], atol=1e-14)
    assert np.allclose(G.covariance, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-14)
    assert connection_probability(G, 0, 1) == pytest.approx(1 / 3, abs=1e-12)


def test_path1_and_path3():
    assert GreenTable(build_path(1))(0, 0) == pytest.approx(1.0)
    G = GreenTable(build_path(3))
    # (I - P)^{-1} for the 3-path: 1/2 * [[3,2,1],[2,4,2],[1,2,3]]
    assert np.allclose(G.matrix, 0.5 * np.array([[3, 2, 1], [2, 4, 2], [1, 2, 3]]), atol=1e-13)


def test_box_d1_n1_center():
    dom = build_box(BoxSpec(1, 1))
    G = GreenTable(dom)
    assert G(dom.index((0,)), dom.index((0,))) == pytest.approx(2.0, abs=1e-12)


def test_spectral_matches_cg_random_pairs():
    spec = BoxSpec(2, 3)
    dom = build_box(spec)
    r = np.random.default_rng(3)
    for _ in range(20):
        x, y = r.integers(dom.n, size=2)
        cg = green_solve(dom, int(x))[y]
        sp = green_box_spectral(spec, dom.point(int(x)), dom.point(int(y)))
        assert abs(cg - sp) < 1e-8


@pytest.mark.parametrize("d,N", [(1, 4), (2, 2), (3, 1), (3, 3)])
def test_spectral_column_matches_dense(d, N):
    spec = BoxSpec(d, N)
    dom = build_box(spec)
    dense = GreenTable(dom)
    lazy = GreenTable(dom, dense_cap=0)
    assert lazy.mode == "columns"
    y = dom.n // 3
    assert np.allclose(green_box_column(spec, dom.point(y)), dense.column(y), atol=1e-10)
    assert np.allclose(lazy.column(y), dense.column(y), atol=1e-10)


def test_irregular_domain_cg_matches_dense():
    dom = from_points([[0, 0], [1, 0], [2, 0], [2, 1], [2, 2], [1, 2]])
    dense = GreenTable(dom)
    lazy = GreenTable(dom, dense_cap=0)
    for y in range(dom.n):
        assert np.allclose(lazy.column(y), dense.column(y), atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(d=st.integers(1, 3), N=st.integers(1, 3), data=st.data())
def test_green_invariants(d, N, data):
    dom = build_box(BoxSpec(d, N))
    G = GreenTable(dom)
    M = G.matrix
    assert np.allclose(M, M.T, atol=1e-12)
    assert np.all(np.diag(M) >= 1 - 1e-12)
    assert np.all(M > 0)
    x = data.draw(st.integers(0, dom.n - 1))
    y = data.draw(st.integers(0, dom.n - 1))
    r = connection_ratio(G, x, y)
    assert 0 <= r <= 1
    # the ratio is invariant under rescaling of G
    assert M[x, y] * 5 / np.sqrt(M[x, x] * 5 * M[y, y] * 5) == pytest.approx(r)


def test_arcsin_law_values():
    assert arcsin_law(0.0) == 0.0
    assert arcsin_law(1.0) == pytest.approx(1.0)
    assert arcsin_law(0.5) == pytest.approx(1 / 3)


def test_corrupt_table_detected():
    G = GreenTable(build_path(2))
    G.matrix = G.matrix.copy()
    G.matrix[0, 1] = 10.0
    with pytest.raises(CorruptGreenTable):
        connection_ratio(G, 0, 1)
    with pytest.raises(ValueError):
        connection_probability(GreenTable(build_path(2)), 0, 0)


def test_profile_rejects_low_dimension():
    with pytest.raises(ValueError):
        twopoint_decay_profile(BoxSpec(2, 4), [1, 2])


def test_profile_decreasing_probability():
    spec = BoxSpec(3, 8)
    prof = twopoint_decay_profile(spec, range(1, 7))
    p = [v / r for r, v in prof]
    assert all(b < a for a, b in zip(p, p[1:]))


def test_profile_d7_finite():
    prof = twopoint_decay_profile(BoxSpec(7, 3), [1, 2, 3])
    assert all(np.isfinite(v) and v > 0 for _, v in prof)


@njit(cache=True)
def _mc_visits(N, walks, seed):
    np.random.seed(seed)
    total = 0.0
    sq = 0.0
    for _ in range(walks):
        x = 0
        y = 0
        z = 0
        c = 0
        while abs(x) <= N and abs(y) <= N and abs(z) <= N:
            if x == 0 and y == 0 and z == 0:
                c += 1
            k = np.random.randint(6)
            s = 1 if k % 2 == 0 else -1
            if k < 2:
                x += s
            elif k < 4:
                y += s
            else:
                z += s
        total += c
        sq += c * c
    return total / walks, np.sqrt((sq / walks - (total / walks) ** 2) / walks)


def test_green_origin_against_monte_carlo_return_counts():
    spec = BoxSpec(3, 6)
    mean, se = _mc_visits(spec.N, 400_000, 11)
    g = green_box_spectral(spec, (0, 0, 0), (0, 0, 0))
    assert abs(mean - g) < 3 * se
    # box values increase toward the infinite-volume constant
    vals = [green_box_spectral(BoxSpec(3, n), (0, 0, 0), (0, 0, 0)) for n in (4, 8, 16)]
    assert vals[0] < vals[1] < vals[2] < WATSON_G3
    assert WATSON_G3 - vals[2] < 0.03

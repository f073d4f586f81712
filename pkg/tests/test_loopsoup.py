import itertools

import numpy as np
import pytest
from scipy import stats

from cablesoup.green import GreenTable
from cablesoup.lattice import BoxSpec, build_box, build_path
from cablesoup.loopsoup import (LoopRoute, RootedDecomposition, accumulate_gamma, dump_loops,
                                glue_edges, loop_chain_clusters, DiscreteLoop, sample_loops)


def test_path1_has_no_nontrivial_loops(rng):
    dec = RootedDecomposition(build_path(1))
    assert dec.return_prob[0] == 0.0
    s = dec.sample_block(rng, 1000, record=True)
    assert s.visits.sum() == 0
    assert all(len(l) == 0 for l in s.loops)


def test_path2_decomposition_values():
    dec = RootedDecomposition(build_path(2))
    # G(1,1) = 4/3 on {1,2}; G(2,2) = 1 on {2}
    assert np.allclose(dec.g_root, [4 / 3, 1.0])
    assert np.allclose(dec.return_prob, [0.25, 0.0])


def test_path2_loop_count_and_gamma_moments(rng):
    route = LoopRoute(build_path(2))
    S = 200_000
    s = route.sample(rng, S)
    n_loops = s.loop_counts.sum(axis=1)
    expected = 0.5 * np.log(4 / 3)
    assert abs(n_loops.mean() - expected) < 4 * np.sqrt(expected / S)
    # Gamma has the law of phi^2/2 with Var(phi) = 2/3: mean 1/3, second moment 1/3
    g = s.gamma
    assert abs(g.mean() - 1 / 3) < 4 * g.std() / np.sqrt(g.size)
    assert abs((g ** 2).mean() - 1 / 3) < 4 * (g ** 2).std() / np.sqrt(S)


def test_two_step_loop_mass(rng):
    # a deep vertex of a 3-d box: expected number of length-2 loops through it is 1/(4d)
    dom = build_box(BoxSpec(3, 1))
    x = dom.index((0, 0, 0))
    dec = RootedDecomposition(dom)
    S = 20_000
    s = dec.sample_block(rng, S, record=True)
    counts = np.array([sum(1 for lp in loops if lp.length == 2 and x in lp.steps) for loops in s.loops])
    assert abs(counts.mean() - 1 / 12) < 4 * counts.std() / np.sqrt(S)


def test_loop_invariants(rng):
    dom = build_box(BoxSpec(2, 2))
    dec = RootedDecomposition(dom)
    rank = np.argsort(dec.order)
    nbrs = {v: set(dom.neighbor_table[v].tolist()) for v in range(dom.n)}
    for _ in range(30):
        for lp in sample_loops(dom, rng, decomposition=dec):
            seq = lp.steps.tolist()
            assert seq[0] == lp.root and lp.length == len(seq) >= 2
            # root is the first vertex of the loop in the ordering
            assert rank[lp.root] == min(rank[v] for v in seq)
            # nearest-neighbour closed walk inside the domain
            for a, b in zip(seq, seq[1:] + seq[:1]):
                assert b in nbrs[a] and b < dom.n


def test_poisson_superposition(rng):
    # two independent soups at intensity 1/4 add up to one soup at 1/2
    dom = build_box(BoxSpec(2, 1))
    dec = RootedDecomposition(dom)
    S = 40_000
    half = dec.sample_block(rng, S).visits
    quarter = dec.sample_block(rng, S, alpha=0.25).visits + dec.sample_block(rng, S, alpha=0.25).visits
    for v in range(dom.n):
        assert stats.ks_2samp(half[:, v], quarter[:, v]).pvalue > 1e-3
    assert abs(half.mean() - quarter.mean()) < 4 * np.hypot(half.std(), quarter.std()) / np.sqrt(S * dom.n)


def test_ordering_invariance(rng):
    dom = build_box(BoxSpec(2, 1))
    S = 40_000
    a = RootedDecomposition(dom).sample_block(rng, S).visits
    b = RootedDecomposition(dom, order=rng.permutation(dom.n)).sample_block(rng, S).visits
    for v in range(dom.n):
        assert stats.ks_2samp(a[:, v], b[:, v]).pvalue > 1e-3


def test_order_must_be_permutation():
    with pytest.raises(ValueError):
        RootedDecomposition(build_path(3), order=[0, 0, 1])
    with pytest.raises(ValueError):
        RootedDecomposition(build_box(BoxSpec(2, 2)), max_vertices=10)


def test_gamma_mean_matches_green(rng):
    dom = build_box(BoxSpec(2, 2))
    s = LoopRoute(dom).sample(rng, 50_000)
    C = GreenTable(dom).covariance
    m = s.gamma.mean(axis=0)
    se = s.gamma.std(axis=0) / np.sqrt(50_000)
    assert np.all(np.abs(m - np.diag(C) / 2) < 4.5 * se)


def test_glue_edges_rules(rng):
    edges = np.array([[0, 1], [1, 2], [0, 3]])  # 3 is the sink
    gamma = np.zeros((1000, 3))
    trav = np.zeros((1000, 3), dtype=int)
    assert not glue_edges(gamma, trav, edges, rng).any()
    trav[:, 0] = 1
    m = glue_edges(gamma, trav, edges, rng)
    assert m[:, 0].all() and not m[:, 1:].any()
    # monotone in the glue constant with common randomness
    g = rng.gamma(0.5, 1.0, size=(1000, 3))
    lo = glue_edges(g, trav * 0, edges, np.random.default_rng(1), glue=1.0)
    hi = glue_edges(g, trav * 0, edges, np.random.default_rng(1), glue=3.0)
    assert np.all(hi >= lo)
    assert not hi[:, 2].any()


def test_path2_cable_connection(rng):
    # untraversed cables open with probability 1 - exp(-2 sqrt(Gamma Gamma)); P = 1/3
    route = LoopRoute(build_path(2))
    S = 200_000
    s = route.sample(rng, S)
    f = s.glue_open[:, route.domain.inner_edges[0]].mean()
    assert abs(f - 1 / 3) < 4 * np.sqrt(2 / 9 / S)


def test_accumulate_gamma_scale(rng):
    dom = build_box(BoxSpec(3, 1))
    g = accumulate_gamma(np.full((100_000, 1), 3), dom, rng)
    assert g.mean() == pytest.approx(3.5 / 6, rel=0.01)


def _brute_chain(loops):
    sets = [set(lp.steps.tolist()) for lp in loops]
    n = len(sets)
    comp = list(range(n))
    changed = True
    while changed:
        changed = False
        for i, j in itertools.combinations(range(n), 2):
            if sets[i] & sets[j] and comp[i] != comp[j]:
                lo, hi = sorted((comp[i], comp[j]))
                comp = [lo if c == hi else c for c in comp]
                changed = True
    groups = {}
    for i, c in enumerate(comp):
        groups.setdefault(c, []).append(i)
    return sorted(groups.values(), key=lambda c: c[0])


def test_loop_chain_clusters_brute_force(rng):
    dom = build_box(BoxSpec(2, 3))
    dec = RootedDecomposition(dom)
    for _ in range(20):
        loops = sample_loops(dom, rng, decomposition=dec)
        assert loop_chain_clusters(loops) == _brute_chain(loops)


def test_dump_loops(tmp_path):
    loops = [DiscreteLoop(root=2, length=2, steps=np.array([2, 3]))]
    p = tmp_path / "loops.txt"
    with open(p, "w") as fh:
        dump_loops(loops, fh)
    assert p.read_text() == "2 2 2 3\n"


def test_doubled_glue_constant_misses_target(rng):
    route = LoopRoute(build_path(2), glue=4.0)
    S = 50_000
    f = route.sample(rng, S).glue_open[:, route.domain.inner_edges[0]].mean()
    assert (f - 1 / 3) / np.sqrt(2 / 9 / S) > 10

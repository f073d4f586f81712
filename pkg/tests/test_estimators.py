import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cablesoup.estimators import (EstimatorSummary, covariance_z, highdim_statistics, isomorphism_tests,
                                  moment_scan, route_agreement_z, same_cluster_counts, spread,
                                  twopoint_empirical, two_sample_z, wilson_interval)
from cablesoup.gff import sample_gff_dense
from cablesoup.green import GreenTable
from cablesoup.lattice import build_path
from cablesoup.loopsoup import LoopRoute

# roots of (p - q)^2 = z^2 q (1 - q) / n at the 99% level, frozen
WILSON_99 = {
    (50, 100): (0.3752796250448398, 0.6247203749551602),
    (0, 20): (0.0, 0.24910540109875343),
    (3333, 10000): (0.3212717811047253, 0.34554927967641014),
}


@pytest.mark.parametrize("kn", list(WILSON_99))
def test_wilson_frozen(kn):
    lo, hi = wilson_interval(*kn, level=0.99)
    assert lo == pytest.approx(WILSON_99[kn][0], abs=1e-12)
    assert hi == pytest.approx(WILSON_99[kn][1], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 10 ** 6), data=st.data())
def test_wilson_contains_point_estimate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


def test_wilson_rejects_empty():
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_wilson_coverage(rng):
    # 99% intervals cover the true value in nearly all of 100 repetitions
    p, n = 1 / 3, 10_000
    covered = sum(lo <= p <= hi for lo, hi in (wilson_interval(int(k), n) for k in rng.binomial(n, p, 100)))
    assert covered >= 96


def test_same_cluster_counts_and_symmetry():
    labels = np.array([[0, 0, 2], [0, 1, 1], [0, 0, 0]])
    assert same_cluster_counts(labels, [(0, 1), (1, 2), (2, 1)]).tolist() == [2, 2, 2]
    est = twopoint_empirical(labels, [(0, 1), (1, 0)], min_samples=1, expected=[0.5, 0.5])
    assert est[0].frequency == est[1].frequency == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        twopoint_empirical(labels, [(0, 1)])
    with pytest.raises(ValueError):
        twopoint_empirical(np.array([5]), [(0, 1)])


def test_twopoint_flags_wrong_expectation():
    est = twopoint_empirical(np.array([3000, 3333]), [(0, 1), (0, 2)], n=10_000, expected=[1 / 3, 1 / 3])
    assert [e.inside for e in est] == [False, True]
    assert est[0].z < -4


def test_two_sample_z_and_route_z(rng):
    a = rng.normal(size=10_000)
    assert abs(two_sample_z(a, rng.normal(size=10_000))) < 4
    assert two_sample_z(a + 1, rng.normal(size=10_000)) > 40
    z = route_agreement_z(np.array([500, 0]), 1000, np.array([500, 0]), 1000)
    assert z.tolist() == [0.0, 0.0]


def test_covariance_z_detects_misscaling(rng):
    G = GreenTable(build_path(2))
    phi = sample_gff_dense(G, rng, 100_000)
    assert np.max(np.abs(covariance_z(phi, G.covariance))) < 4
    assert np.max(np.abs(covariance_z(1.1 * phi, G.covariance))) > 4


def test_isomorphism_tests_detects_misscaled_gamma(rng):
    dom = build_path(2)
    S = 100_000
    gamma = LoopRoute(dom).sample(rng, S).gamma
    phi = sample_gff_dense(GreenTable(dom), rng, S)
    assert all(v.passed for v in isomorphism_tests(gamma, phi))
    bad = isomorphism_tests(1.1 * gamma, phi)
    assert not any(v.passed for v in bad)
    assert all(abs(v.mean_z) > 4 for v in bad)


def _rows(max_sizes, large):
    return [{"max_size": m, "large_count": l, "identity_ok": True, "origin_size": 1, "sum_sq_sizes": 1}
            for m, l in zip(max_sizes, large)]


def test_highdim_statistics():
    rows = {2: _rows([16 * np.log(2)] * 4, [0, 1, 0, 1]), 3: _rows([81 * np.log(3)] * 4, [1, 1, 2, 0])}
    out = highdim_statistics(rows, d=7)
    assert out["c_fit"] == pytest.approx(1.0)
    assert out["max_ratio_spread"] == pytest.approx(1.0)
    assert out["large_count_nondecreasing"]
    assert out["per_N"][0]["freq_large_at_least_one"] == 0.5
    assert out["per_N"][1]["disjoint_scale"] == pytest.approx(3 / np.log(3) ** 2)
    rows[3] = _rows([81 * np.log(3)] * 4, [0, 0, 0, 0])
    assert not highdim_statistics(rows, d=7)["large_count_nondecreasing"]


def test_moment_scan():
    out = moment_scan({2: [{"origin_size": 8, "sum_sq_sizes": 512}] * 3}, d=7)
    assert out[0]["origin_ratio"] == 2.0
    assert out[0]["sum_sq_ratio"] == 1.0


def test_spread_and_summary():
    assert spread([1, 2, 4]) == 4.0
    assert spread([0, 1]) == float("inf")
    s = EstimatorSummary("x")
    s.verdict("a", True)
    s.verdict("b", False, asserted=False)
    assert s.passed
    s.verdict("c", False)
    assert not s.passed
    assert s.to_dict()["verdicts"]["b"]["asserted"] is False

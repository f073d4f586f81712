"""Reductions from per-sample outputs to estimates, error bars and verdicts."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

Z_MAX = 4.0
KS_P_MIN = 0.01
CI_LEVEL = 0.99


def wilson_interval(k: int, n: int, level: float = CI_LEVEL) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    z = stats.norm.ppf(0.5 + level / 2)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return float(lo), float(hi)


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return float(x.mean()), se


def two_sample_z(a, b) -> float:
    """z-score of the difference of two independent sample means."""
    ma, sa = mean_se(a)
    mb, sb = mean_se(b)
    den = np.hypot(sa, sb)
    return float((ma - mb) / den) if den > 0 else (0.0 if ma == mb else float("inf"))


@dataclass
class PairEstimate:
    x: int
    y: int
    hits: int
    n: int
    frequency: float
    ci_low: float
    ci_high: float
    expected: float | None = None
    z: float | None = None
    inside: bool | None = None


def same_cluster_counts(labels: np.ndarray, pairs) -> np.ndarray:
    """Number of samples (rows of ``labels``) in which each pair shares a label."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.count_nonzero(labels[:, pairs[:, 0]] == labels[:, pairs[:, 1]], axis=0)


def twopoint_empirical(labels_or_counts, pairs, n: int | None = None, expected=None,
                       level: float = CI_LEVEL, min_samples: int = 1000) -> list[PairEstimate]:
    """Same-cluster frequencies with Wilson intervals.

    Takes either a ``(samples, n_vertices)`` label matrix or precomputed hit
    counts together with ``n``.  Pairs whose interval misses ``expected`` are
    flagged through ``inside=False``.
    """
    pairs = [tuple(int(v) for v in p) for p in pairs]
    arr = np.asarray(labels_or_counts)
    if arr.ndim == 2:
        n = arr.shape[0]
        hits = same_cluster_counts(arr, pairs)
    else:
        if n is None:
            raise ValueError("n is required with precomputed counts")
        hits = arr
    if n < min_samples:
        raise ValueError(f"two-point estimates need at least {min_samples} samples, got {n}")
    out = []
    for i, (x, y) in enumerate(pairs):
        k = int(hits[i])
        lo, hi = wilson_interval(k, n, level)
        est = PairEstimate(x=x, y=y, hits=k, n=n, frequency=k / n, ci_low=lo, ci_high=hi)
        if expected is not None:
            p = float(expected[i])
            est.expected = p
            est.inside = bool(lo <= p <= hi)
            se = np.sqrt(p * (1 - p) / n)
            est.z = float((k / n - p) / se) if se > 0 else 0.0
        out.append(est)
    return out


def route_agreement_z(hits_a: np.ndarray, n_a: int, hits_b: np.ndarray, n_b: int) -> np.ndarray:
    """Two-proportion z-scores between two independent estimates of the same pairs."""
    pa, pb = hits_a / n_a, hits_b / n_b
    se = np.sqrt(pa * (1 - pa) / n_a + pb * (1 - pb) / n_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(se > 0, (pa - pb) / se, 0.0)
    return z


def covariance_z(samples: np.ndarray, C: np.ndarray, pairs=None) -> np.ndarray:
    """z-scores of the known-zero-mean covariance estimates against ``C``.

    Entry ``(x, y)`` compares ``mean(phi_x phi_y)`` with ``C[x, y]`` using
    the empirical standard error of the product.  With ``pairs`` only those
    entries are returned (flat array); otherwise the upper triangle.
    """
    S = samples.shape[0]
    if pairs is None:
        pairs = np.stack(np.triu_indices(samples.shape[1]), axis=1)
    pairs = np.asarray(pairs)
    prod = samples[:, pairs[:, 0]] * samples[:, pairs[:, 1]]
    m = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / np.sqrt(S)
    return (m - C[pairs[:, 0], pairs[:, 1]]) / se


@dataclass
class VertexLawTest:
    vertex: int
    ks_p: float
    mean_z: float
    second_moment_z: float
    passed: bool


def isomorphism_tests(gamma: np.ndarray, phi: np.ndarray, z_max: float = Z_MAX,
                      p_min: float = KS_P_MIN) -> list[VertexLawTest]:
    """Per-vertex comparison of the law of ``Gamma(x)`` with ``phi(x)^2 / 2``."""
    half_sq = 0.5 * phi ** 2
    out = []
    for v in range(gamma.shape[1]):
        a, b = gamma[:, v], half_sq[:, v]
        p = float(stats.ks_2samp(a, b).pvalue)
        z1 = two_sample_z(a, b)
        z2 = two_sample_z(a ** 2, b ** 2)
        out.append(VertexLawTest(v, p, z1, z2, bool(p >= p_min and abs(z1) <= z_max and abs(z2) <= z_max)))
    return out


# -- cluster statistics over box ladders -------------------------------------


def sample_row(report, origin: int, threshold: float, b1=None, b2=None) -> dict:
    """Scalar per-sample summary of a :class:`~cablesoup.clusters.ClusterReport`."""
    sq = report.size_moment(2)
    pointwise = report.pointwise_moment(1)
    row = {
        "n_clusters": report.n0,
        "max_size": int(report.sizes.max()),
        "large_count": report.large_cluster_count(threshold),
        "origin_size": int(report.sizes[report.labels[origin]]),
        "sum_sq_sizes": sq,
        "sum_pointwise": pointwise,
        "identity_ok": bool(sq == pointwise),
    }
    if b1 is not None:
        row["X"] = report.box_intersections(b1, b2)[2]
    return row


def moment_scan(rows_by_N: dict[int, list[dict]], d: int, k: int = 1) -> list[dict]:
    """``E|C(0)|^k`` and ``E sum_n |C_n|^(k+1)`` per box size, with the growth ratios."""
    out = []
    for N in sorted(rows_by_N):
        rows = rows_by_N[N]
        c0 = np.array([r["origin_size"] for r in rows], dtype=float) ** k
        m0, s0 = mean_se(c0)
        entry = {"N": N, "samples": len(rows), f"E_origin_size_pow{k}": m0, f"E_origin_size_pow{k}_se": s0}
        if k == 1:
            sq = np.array([r["sum_sq_sizes"] for r in rows], dtype=float)
            m2, s2 = mean_se(sq)
            entry.update({
                "E_sum_sq_sizes": m2, "E_sum_sq_sizes_se": s2,
                "origin_ratio": m0 / N ** 2,
                "sum_sq_ratio": m2 / N ** (d + 2),
            })
        out.append(entry)
    return out


def spread(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min()) if v.min() > 0 else float("inf")


def highdim_statistics(rows_by_N: dict[int, list[dict]], d: int, quantile: float = 0.95) -> dict:
    """Largest-cluster and large-cluster-count statistics per box size.

    The constant ``c`` in ``max|C| <= c N^4 log N`` is fitted as the pooled
    ``quantile`` of the per-sample ratio; the fraction of samples below it is
    reported per size.
    """
    Ns = sorted(rows_by_N)
    ratios = {N: np.array([r["max_size"] for r in rows_by_N[N]]) / (N ** 4 * np.log(N)) for N in Ns}
    c_fit = float(np.quantile(np.concatenate(list(ratios.values())), quantile))
    per_N = []
    for N in Ns:
        rows = rows_by_N[N]
        large = np.array([r["large_count"] for r in rows], dtype=float)
        ml, sl = mean_se(large)
        mr, sr = mean_se(ratios[N])
        per_N.append({
            "N": N,
            "samples": len(rows),
            "mean_large_count": ml,
            "mean_large_count_se": sl,
            "freq_large_at_least_one": float(np.mean(large >= 1)),
            "mean_max_size": float(np.mean([r["max_size"] for r in rows])),
            "mean_max_ratio": mr,
            "mean_max_ratio_se": sr,
            "frac_max_below_fit": float(np.mean(ratios[N] <= c_fit)),
            "disjoint_scale": float(N ** (d - 6) / np.log(N) ** 2),
            "identity_all": bool(all(r["identity_ok"] for r in rows)),
        })
    means = [p["mean_large_count"] for p in per_N]
    return {
        "c_fit": c_fit,
        "per_N": per_N,
        "large_count_nondecreasing": bool(all(b >= a for a, b in zip(means, means[1:]))),
        "max_ratio_spread": spread([p["mean_max_ratio"] for p in per_N]),
    }


@dataclass
class EstimatorSummary:
    experiment: str
    quantities: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    def add(self, name: str, **values) -> None:
        self.quantities[name] = values

    def verdict(self, name: str, passed: bool, asserted: bool = True, **detail) -> None:
        self.verdicts[name] = {"passed": bool(passed), "asserted": asserted, **detail}

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts.values() if v["asserted"])

    def to_dict(self) -> dict:
        return asdict(self)

"""The named experiments: each turns a validated config into result records."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, stats

from . import __version__
from .clusters import component_labels, extract_box_clusters, separated_boxes
from .config import ExperimentConfig
from .estimators import (EstimatorSummary, covariance_z, highdim_statistics, isomorphism_tests,
                         mean_se, moment_scan, route_agreement_z, same_cluster_counts, sample_row,
                         spread, twopoint_empirical)
from .gff import EdgeCoupling, mark_box_edges, mark_edges, sample_gff_box_spectral, sample_gff_dense, signed_field
from .green import GreenTable, arcsin_law, connection_probability, green_box_column, twopoint_decay_profile
from .lattice import BoxSpec, LatticeDomain, domain_from_dict
from .loopsoup import DEFAULT_LOOP_ROUTE_CAP, LoopRoute
from .rng import map_blocks

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
EDGE_TARGET = 1.0 / 3.0
PATH2_COV = np.array([[2.0, 1.0], [1.0, 2.0]]) / 3.0

# independent random streams within one experiment
STREAM_GFF = 1
STREAM_LOOP = 2
STREAM_META = 3

HIGHDIM_MEMORY_BUDGET = 2.0e9
HIGHDIM_BYTES_PER_VERTEX = 400
XCHECK_MAX_POINTS = 64


class CalibrationError(RuntimeError):
    pass


@dataclass
class ExperimentResult:
    records: list[dict]
    passed: bool
    csv_rows: list[dict] = field(default_factory=list)


# -- edge-coupling calibration ----------------------------------------------


@lru_cache(maxsize=16)
def edge_open_integral(kappa: float) -> float:
    """``E[1{ab > 0} (1 - exp(-kappa a b))]`` for the 2-vertex path field, by quadrature."""
    law = stats.multivariate_normal(mean=[0.0, 0.0], cov=PATH2_COV)

    def f(b, a):
        return law.pdf([a, b]) * (1.0 - np.exp(-kappa * a * b))

    # both same-sign quadrants contribute equally
    val, _ = integrate.dblquad(f, 0.0, np.inf, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10)
    return 2.0 * val


def calibrate(kappa: float, tol: float = 1e-6) -> float:
    val = edge_open_integral(float(kappa))
    if abs(val - EDGE_TARGET) > tol:
        raise CalibrationError(
            f"edge coupling kappa={kappa} gives edge-open probability {val:.8f}, expected 1/3 within {tol:g}")
    return val


# -- shared sampling helpers ------------------------------------------------


def _domain(cfg: ExperimentConfig, N: int | None = None) -> LatticeDomain:
    return domain_from_dict(cfg.domain_dict(N))


def _gff_sampler(dom: LatticeDomain, G: GreenTable | None):
    if G is not None and G.matrix is not None:
        return lambda rng, size: sample_gff_dense(G, rng, size)
    if dom.box is None:
        raise ValueError("non-box domains above the dense cap are not supported on the gff route")
    return lambda rng, size: sample_gff_box_spectral(dom.box, rng, size)


def _gff_block(dom, sampler, coupling, rng, size):
    phi = sampler(rng, size)
    marks = mark_edges(dom.edges, phi, rng, coupling)
    labels = component_labels(dom.n, dom.edges, marks)
    return phi, marks, labels


def _loop_allowed(dom: LatticeDomain) -> bool:
    return dom.n <= DEFAULT_LOOP_ROUTE_CAP


def resolve_pairs(cfg: ExperimentConfig, dom: LatticeDomain, count: int = 10) -> list[tuple[int, int]]:
    """Configured pairs, or a deterministic spread of pairs from the domain."""
    if cfg.pairs:
        return [(dom.index(a), dom.index(b)) for a, b in cfg.pairs]
    if dom.n * (dom.n - 1) // 2 <= count:
        return [(x, y) for x in range(dom.n) for y in range(x + 1, dom.n)]
    d = dom.d
    origin = (0,) * d if dom.box is not None else dom.point(dom.n // 2)
    o = np.array(origin)
    e1 = np.eye(d, dtype=int)[0]
    diag = np.ones(d, dtype=int)
    cand = []
    for r in range(1, 64):
        cand.append((o, o + r * e1))
        cand.append((o, o + r * diag))
        cand.append((o - r * e1, o + r * e1))
        cand.append((o - r * diag, o + r * diag))
    out = []
    for a, b in cand:
        ia, ib = dom.lookup(np.stack([a, b]))
        if ia >= 0 and ib >= 0 and ia != ib and (ia, ib) not in out:
            out.append((int(ia), int(ib)))
        if len(out) == count:
            break
    return out


def _header(cfg: ExperimentConfig, kind: str) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "record": kind,
        "experiment": cfg.experiment,
        "code_version": __version__,
        "config": cfg.echo(),
        "rng": {"generator": "philox4x64", "seed": cfg.seed, "block_size": cfg.block_size,
                "streams": {"gff": STREAM_GFF, "loopsoup": STREAM_LOOP, "meta": STREAM_META}},
    }


def _pair_rows(dom, estimates) -> list[dict]:
    rows = []
    for e in estimates:
        row = asdict(e)
        row["x_point"] = list(dom.point(e.x))
        row["y_point"] = list(dom.point(e.y))
        rows.append(row)
    return rows


def _two_point_hits(dom, route, pairs, cfg, threads, G):
    coupling = EdgeCoupling(cfg.kappa)
    pairs_arr = np.asarray(pairs)
    if route == "gff":
        sampler = _gff_sampler(dom, G)

        def work(rng, b, start, stop):
            _, _, labels = _gff_block(dom, sampler, coupling, rng, stop - start)
            return same_cluster_counts(labels, pairs_arr)

        parts = map_blocks(work, cfg.samples, cfg.seed, STREAM_GFF, cfg.block_size, threads)
    else:
        loop = LoopRoute(dom)

        def work(rng, b, start, stop):
            s = loop.sample(rng, stop - start)
            labels = component_labels(dom.n, dom.edges, s.glue_open)
            return same_cluster_counts(labels, pairs_arr)

        parts = map_blocks(work, cfg.samples, cfg.seed, STREAM_LOOP, cfg.block_size, threads)
    return np.sum(parts, axis=0)


# -- experiments ---------------------------------------------------------------


def arcsin_check(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    t = cfg.thresholds
    calibrate(cfg.kappa, t["integral_tol"])
    dom = _domain(cfg)
    G = GreenTable(dom)
    pairs = resolve_pairs(cfg, dom)
    expected = [connection_probability(G, x, y) for x, y in pairs]
    routes = ["gff", "loopsoup"] if cfg.route == "both" else [cfg.route]
    notices = []
    if "loopsoup" in routes and not _loop_allowed(dom):
        routes = ["gff"]
        notices.append(f"loop route disabled above {DEFAULT_LOOP_ROUTE_CAP} vertices; gff route only")
    summary = EstimatorSummary(cfg.experiment)
    records = []
    for route in routes:
        hits = _two_point_hits(dom, route, pairs, cfg, threads, G)
        est = twopoint_empirical(hits, pairs, n=cfg.samples, expected=expected, level=t["ci_level"])
        inside = sum(e.inside for e in est)
        frac = inside / len(est)
        summary.verdict(f"{route}_pairs_inside_ci", frac >= t["pair_fraction"],
                        inside=inside, pairs=len(est), required_fraction=t["pair_fraction"])
        rec = _header(cfg, "aggregate")
        rec.update({"route": route, "samples": cfg.samples, "pairs": _pair_rows(dom, est)})
        records.append(rec)
    rec = _header(cfg, "summary")
    rec.update({"verdicts": summary.verdicts, "passed": summary.passed, "notices": notices})
    records.append(rec)
    return ExperimentResult(records, summary.passed)


def _gff_and_signed(dom, G, cfg, threads):
    coupling = EdgeCoupling(cfg.kappa)
    sampler = _gff_sampler(dom, G)

    def work(rng, b, start, stop):
        phi, _, labels = _gff_block(dom, sampler, coupling, rng, stop - start)
        return phi, signed_field(phi, labels, rng), labels

    parts = map_blocks(work, cfg.samples, cfg.seed, STREAM_GFF, cfg.block_size, threads)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]))


def _loop_samples(dom, cfg, threads):
    loop = LoopRoute(dom)

    def work(rng, b, start, stop):
        s = loop.sample(rng, stop - start)
        return s.gamma, component_labels(dom.n, dom.edges, s.glue_open)

    parts = map_blocks(work, cfg.samples, cfg.seed, STREAM_LOOP, cfg.block_size, threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def single_vertex_meta_check(samples: int, seed: int, runs: int = 100, p_min: float = 0.01,
                             threads: int | None = None) -> dict:
    """Repeated KS tests of Gamma against phi^2/2 on the one-vertex path."""
    dom = domain_from_dict({"kind": "path", "k": 1})
    G = GreenTable(dom)
    loop = LoopRoute(dom)

    def work(rng, b, start, stop):
        s = loop.sample(rng, samples)
        phi = sample_gff_dense(G, rng, samples)
        return stats.ks_2samp(s.gamma[:, 0], 0.5 * phi[:, 0] ** 2).pvalue

    pvals = np.array(map_blocks(work, runs, seed, STREAM_META, 1, threads))
    return {"runs": runs, "samples_per_run": samples, "passes": int(np.sum(pvals > p_min)),
            "p_values_min": float(pvals.min())}


def isomorphism_check(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    t = cfg.thresholds
    calibrate(cfg.kappa, t["integral_tol"])
    dom = _domain(cfg)
    if not _loop_allowed(dom):
        raise ValueError(f"isomorphism-check needs the loop route (at most {DEFAULT_LOOP_ROUTE_CAP} vertices)")
    G = GreenTable(dom)
    C = G.covariance
    phi, signed, _ = _gff_and_signed(dom, G, cfg, threads)
    gamma, _ = _loop_samples(dom, cfg, threads)
    summary = EstimatorSummary(cfg.experiment)

    law = isomorphism_tests(gamma, phi, t["z_max"], t["ks_p_min"])
    summary.verdict("occupation_law_per_vertex", all(v.passed for v in law),
                    failing=[v.vertex for v in law if not v.passed])
    z_phi = covariance_z(phi, C)
    z_signed = covariance_z(signed, C)
    summary.verdict("gff_covariance", np.max(np.abs(z_phi)) <= t["z_max"], max_abs_z=float(np.max(np.abs(z_phi))))
    summary.verdict("sign_resampled_covariance", np.max(np.abs(z_signed)) <= t["z_max"],
                    max_abs_z=float(np.max(np.abs(z_signed))), entries=int(z_signed.size))
    meta = None
    if dom.n == 1:
        meta = single_vertex_meta_check(cfg.samples, cfg.seed, p_min=t["ks_p_min"], threads=threads)
        summary.verdict("single_vertex_meta", meta["passes"] >= 98, **meta)
    rec = _header(cfg, "aggregate")
    rec.update({
        "samples": cfg.samples,
        "vertices": [dict(asdict(v), point=list(dom.point(v.vertex)),
                          gamma_mean=float(gamma[:, v.vertex].mean()),
                          half_phi_sq_mean=float(0.5 * np.mean(phi[:, v.vertex] ** 2)))
                     for v in law],
        "covariance_max_abs_z": {"gff": float(np.max(np.abs(z_phi))), "signed": float(np.max(np.abs(z_signed)))},
    })
    summ = _header(cfg, "summary")
    summ.update({"verdicts": summary.verdicts, "passed": summary.passed})
    return ExperimentResult([rec, summ], summary.passed)


def coupling_equivalence(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    t = cfg.thresholds
    calibrate(cfg.kappa, t["integral_tol"])
    dom = _domain(cfg)
    if not _loop_allowed(dom):
        raise ValueError(f"coupling-equivalence needs the loop route (at most {DEFAULT_LOOP_ROUTE_CAP} vertices)")
    G = GreenTable(dom)
    if cfg.pairs:
        pairs = resolve_pairs(cfg, dom)
    else:
        pairs = [(x, y) for x in range(dom.n) for y in range(x + 1, dom.n)]
    summary = EstimatorSummary(cfg.experiment)
    rec = _header(cfg, "aggregate")
    if pairs:
        expected = np.array([connection_probability(G, x, y) for x, y in pairs])
        hg = _two_point_hits(dom, "gff", pairs, cfg, threads, G)
        hl = _two_point_hits(dom, "loopsoup", pairs, cfg, threads, G)
        n = cfg.samples
        z_routes = route_agreement_z(hl, n, hg, n)
        se_exact = np.sqrt(expected * (1 - expected) / n)
        z_gff = (hg / n - expected) / se_exact
        z_loop = (hl / n - expected) / se_exact
        summary.verdict("routes_agree", np.max(np.abs(z_routes)) <= t["z_max"], max_abs_z=float(np.max(np.abs(z_routes))))
        summary.verdict("gff_matches_arcsin", np.max(np.abs(z_gff)) <= t["z_max"], max_abs_z=float(np.max(np.abs(z_gff))))
        summary.verdict("loop_matches_arcsin", np.max(np.abs(z_loop)) <= t["z_max"], max_abs_z=float(np.max(np.abs(z_loop))))
        rec["pairs"] = [
            {"x": int(x), "y": int(y), "x_point": list(dom.point(x)), "y_point": list(dom.point(y)),
             "expected": float(p), "gff_frequency": float(a / n), "loop_frequency": float(b / n),
             "z_routes": float(zr)}
            for (x, y), p, a, b, zr in zip(pairs, expected, hg, hl, z_routes)
        ]
    rec["samples"] = cfg.samples
    summ = _header(cfg, "summary")
    summ.update({"verdicts": summary.verdicts, "passed": summary.passed})
    return ExperimentResult([rec, summ], summary.passed)


def twopoint_decay(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    t = cfg.thresholds
    spec = BoxSpec(cfg.d, cfg.N[0])
    radii = cfg.radii or list(range(1, spec.N + 1))
    lo, hi = cfg.plateau or [4, 12]
    profile = twopoint_decay_profile(spec, radii)
    window = [v for r, v in profile if lo <= r <= hi]
    probs = [v / r ** (spec.d - 2) for r, v in profile]
    summary = EstimatorSummary(cfg.experiment)
    ratio = spread(window) if window else float("nan")
    summary.verdict("plateau", bool(window) and ratio < t["plateau_ratio"], max_over_min=ratio,
                    window=[lo, hi], threshold=t["plateau_ratio"])
    summary.verdict("monotone_decrease", all(b < a for a, b in zip(probs, probs[1:])))
    rec = _header(cfg, "aggregate")
    rec["profile"] = [{"r": r, "scaled_probability": v, "probability": p} for (r, v), p in zip(profile, probs)]
    summ = _header(cfg, "summary")
    summ.update({"verdicts": summary.verdicts, "passed": summary.passed})
    return ExperimentResult([rec, summ], summary.passed)


def _xcheck_expectation(spec: BoxSpec, b1: np.ndarray, b2: np.ndarray) -> float:
    """``sum_{x1 in B1, x2 in B2} P[x1 <-> x2]`` from spectral Green columns."""
    cols = {int(x): green_box_column(spec, spec.point(int(x))) for x in np.concatenate([b1, b2])}
    total = 0.0
    for x1 in b1:
        c1 = cols[int(x1)]
        for x2 in b2:
            ratio = c1[x2] / np.sqrt(c1[x1] * cols[int(x2)][x2])
            total += float(arcsin_law(ratio))
    return total


def highdim_scan(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    t = cfg.thresholds
    calibrate(cfg.kappa, t["integral_tol"])
    coupling = EdgeCoupling(cfg.kappa)
    rows_by_N: dict[int, list[dict]] = {}
    csv_rows = []
    records = []
    xchecks = {}
    for N in cfg.N:
        spec = BoxSpec(cfg.d, N)
        origin = spec.index((0,) * cfg.d)
        b1, b2 = separated_boxes(spec)
        cap = max(1, int(HIGHDIM_MEMORY_BUDGET // (spec.n_vertices * HIGHDIM_BYTES_PER_VERTEX)))
        workers = min(threads or 1, cap)

        def work(rng, b, start, stop, spec=spec, origin=origin, b1=b1, b2=b2):
            rows = []
            for _ in range(start, stop):
                phi = sample_gff_box_spectral(spec, rng)
                marks = mark_box_edges(spec, phi, rng, coupling)
                rep = extract_box_clusters(spec, marks)
                rows.append(sample_row(rep, origin, spec.N / 2, b1, b2))
            return rows

        parts = map_blocks(work, cfg.samples, cfg.seed, STREAM_GFF + 16 * N, cfg.block_size, workers)
        rows = [r for part in parts for r in part]
        rows_by_N[N] = rows
        for i, r in enumerate(rows):
            csv_rows.append({"N": N, "sample": i, **r})
        x_mean, x_se = mean_se([r["X"] for r in rows])
        entry = {"N": N, "B1_size": int(b1.size), "B2_size": int(b2.size), "mean_X": x_mean, "mean_X_se": x_se}
        if b1.size + b2.size <= XCHECK_MAX_POINTS:
            exp_x = _xcheck_expectation(spec, b1, b2)
            # X is a sum of rare indicators: Var X >= ~E X, which keeps the SE
            # meaningful when no connection was observed at all
            xs = np.array([r["X"] for r in rows], dtype=float)
            var = max(float(xs.var(ddof=1)) if xs.size > 1 else 0.0, exp_x)
            se = np.sqrt(var / xs.size)
            z = (x_mean - exp_x) / se
            entry.update({"expected_X": exp_x, "se_used": float(se), "z": float(z)})
            xchecks[N] = entry
        rec = _header(cfg, "aggregate")
        rec.update({"N": N, "samples": len(rows), "box_intersections": entry})
        records.append(rec)
        log.info("highdim N=%d done (%d samples)", N, len(rows))

    stats_ = highdim_statistics(rows_by_N, cfg.d)
    moments = moment_scan(rows_by_N, cfg.d, k=1)
    summary = EstimatorSummary(cfg.experiment)
    summary.verdict("large_count_nondecreasing", stats_["large_count_nondecreasing"],
                    means=[p["mean_large_count"] for p in stats_["per_N"]])
    summary.verdict("max_ratio_spread", stats_["max_ratio_spread"] < t["max_ratio_spread"],
                    spread=stats_["max_ratio_spread"], threshold=t["max_ratio_spread"])
    summary.verdict("size_identity_exact", all(p["identity_all"] for p in stats_["per_N"]))
    for N, entry in xchecks.items():
        summary.verdict(f"xcheck_N{N}", abs(entry["z"]) <= t["z_max"], z=entry["z"])
    summary.verdict("origin_ratio_spread", spread([m["origin_ratio"] for m in moments]) < 3.0,
                    asserted=False, spread=spread([m["origin_ratio"] for m in moments]))
    summ = _header(cfg, "summary")
    summ.update({"statistics": stats_, "moments": moments, "verdicts": summary.verdicts, "passed": summary.passed})
    records.append(summ)
    return ExperimentResult(records, summary.passed, csv_rows)


def edge_oracle(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    t = cfg.thresholds
    dom = domain_from_dict({"kind": "path", "k": 2})
    G = GreenTable(dom)
    coupling = EdgeCoupling(cfg.kappa)
    integral = edge_open_integral(cfg.kappa)
    inner = int(dom.inner_edges[0])

    def work(rng, b, start, stop):
        phi = sample_gff_dense(G, rng, stop - start)
        return int(mark_edges(dom.edges, phi, rng, coupling)[:, inner].sum())

    hits = sum(map_blocks(work, cfg.samples, cfg.seed, STREAM_GFF, cfg.block_size, threads))
    n = cfg.samples
    target = connection_probability(G, 0, 1)
    freq = hits / n
    z = (freq - target) / np.sqrt(target * (1 - target) / n)
    summary = EstimatorSummary(cfg.experiment)
    summary.verdict("integral_matches", abs(integral - EDGE_TARGET) <= t["integral_tol"],
                    integral=integral, target=EDGE_TARGET, tol=t["integral_tol"])
    summary.verdict("simulation_matches", abs(z) <= t["z_max"], frequency=freq, z=float(z))
    rec = _header(cfg, "summary")
    rec.update({"samples": n, "kappa": cfg.kappa, "verdicts": summary.verdicts, "passed": summary.passed})
    return ExperimentResult([rec], summary.passed)


REGISTRY = {
    "arcsin-check": arcsin_check,
    "isomorphism-check": isomorphism_check,
    "coupling-equivalence": coupling_equivalence,
    "twopoint-decay": twopoint_decay,
    "highdim-scan": highdim_scan,
    "edge-oracle": edge_oracle,
}

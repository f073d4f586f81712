"""Cluster extraction from open-edge marks and the box-level cluster statistics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .lattice import BoxSpec, LatticeDomain


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _union_pairs(n, u, v, keep):
    """Min-vertex labels of the components of the graph with edges ``keep``.

    Union by size with path halving.  Pairs touching ``n`` (the sink) are skipped.
    """
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for e in range(u.shape[0]):
        if not keep[e]:
            continue
        a = u[e]
        b = v[e]
        if a >= n or b >= n:
            continue
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb:
            continue
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
    lab = np.full(n, -1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        r = _find(parent, i)
        if lab[r] < 0:
            lab[r] = i
        out[i] = lab[r]
    return out


@njit(cache=True)
def _union_batch(n, u, v, marks):
    B = marks.shape[0]
    out = np.empty((B, n), dtype=np.int64)
    for b in range(B):
        out[b] = _union_pairs(n, u, v, marks[b])
    return out


@njit(cache=True)
def _extents(cidx, points, n0):
    d = points.shape[1]
    lo = np.empty((n0, d), dtype=np.int64)
    hi = np.empty((n0, d), dtype=np.int64)
    seen = np.zeros(n0, dtype=np.bool_)
    for i in range(cidx.shape[0]):
        c = cidx[i]
        if not seen[c]:
            seen[c] = True
            for a in range(d):
                lo[c, a] = points[i, a]
                hi[c, a] = points[i, a]
        else:
            for a in range(d):
                p = points[i, a]
                if p < lo[c, a]:
                    lo[c, a] = p
                if p > hi[c, a]:
                    hi[c, a] = p
    diam = np.zeros(n0, dtype=np.int64)
    for c in range(n0):
        m = 0
        for a in range(d):
            w = hi[c, a] - lo[c, a]
            if w > m:
                m = w
        diam[c] = m
    return diam


def component_labels(n: int, edges: np.ndarray, marks: np.ndarray) -> np.ndarray:
    """Minimal-vertex-id label per vertex, for one mark vector or a ``(B, E)`` batch."""
    u = np.ascontiguousarray(edges[:, 0], dtype=np.int64)
    v = np.ascontiguousarray(edges[:, 1], dtype=np.int64)
    marks = np.asarray(marks, dtype=np.bool_)
    if marks.ndim == 1:
        return _union_pairs(n, u, v, marks)
    return _union_batch(n, u, v, np.ascontiguousarray(marks))


@dataclass
class ClusterSummary:
    label: int
    root: int
    size: int
    diameter: int
    members: np.ndarray


@dataclass
class ClusterReport:
    """Clusters of one sample, ordered by their minimal vertex id.

    ``labels[x]`` is the cluster index of vertex ``x`` and ``roots[c]`` the
    minimal vertex id of cluster ``c``.  ``diameters`` are L-infinity extents.
    """

    labels: np.ndarray
    roots: np.ndarray
    sizes: np.ndarray
    diameters: np.ndarray
    boxes: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n0(self) -> int:
        return int(self.roots.shape[0])

    @classmethod
    def from_min_labels(cls, min_labels: np.ndarray, points: np.ndarray) -> "ClusterReport":
        roots = np.flatnonzero(min_labels == np.arange(min_labels.shape[0]))
        cidx = np.searchsorted(roots, min_labels)
        sizes = np.bincount(cidx, minlength=roots.shape[0])
        diam = _extents(cidx, points, roots.shape[0])
        return cls(labels=cidx, roots=roots, sizes=sizes, diameters=diam)

    def cluster_of(self, x: int) -> ClusterSummary:
        c = int(self.labels[x])
        return ClusterSummary(label=c, root=int(self.roots[c]), size=int(self.sizes[c]),
                              diameter=int(self.diameters[c]),
                              members=np.flatnonzero(self.labels == c))

    def register_box(self, name: str, ids: np.ndarray) -> np.ndarray:
        """Store ``|C_n cap B|`` for every cluster under ``name``."""
        counts = np.bincount(self.labels[np.asarray(ids)], minlength=self.n0)
        self.boxes[name] = counts
        return counts

    def box_intersections(self, b1: np.ndarray, b2: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
        """Per-cluster counts in two vertex sets and ``X = sum_n |C_n cap B1| |C_n cap B2|``."""
        c1 = self.register_box("B1", b1)
        c2 = self.register_box("B2", b2)
        return c1, c2, int(np.dot(c1, c2))

    def large_cluster_count(self, threshold: float) -> int:
        return int(np.count_nonzero(self.diameters > threshold))

    def size_moment(self, k: int) -> int:
        """``sum_n |C_n|^k`` as an exact integer."""
        return int(np.sum(self.sizes.astype(object) ** k)) if k > 3 else int(np.sum(self.sizes ** k))

    def pointwise_moment(self, k: int) -> int:
        """``sum_x |C(x)|^k``."""
        s = self.sizes[self.labels]
        return int(np.sum(s.astype(object) ** k)) if k > 3 else int(np.sum(s ** k))

    def summary(self) -> dict:
        hist = np.bincount(self.sizes)
        nz = np.flatnonzero(hist)
        return {
            "n_clusters": self.n0,
            "max_size": int(self.sizes.max()),
            "size_histogram": {int(s): int(hist[s]) for s in nz},
        }


def extract_clusters(dom: LatticeDomain, open_marks: np.ndarray) -> ClusterReport:
    """Union-find over open edges of one sample."""
    open_marks = np.asarray(open_marks, dtype=bool)
    if open_marks.shape != (dom.n_edges,):
        raise ValueError(f"expected {dom.n_edges} edge marks, got shape {open_marks.shape}")
    labels = component_labels(dom.n, dom.edges, open_marks)
    return ClusterReport.from_min_labels(labels, dom.points)


def _box_points(spec: BoxSpec) -> np.ndarray:
    dt = np.int8 if spec.N < 127 else np.int32
    return (np.indices(spec.shape, dtype=dt).reshape(spec.d, -1).T - dt(spec.N)).copy()


_BOX_POINTS: dict[BoxSpec, np.ndarray] = {}


def box_points(spec: BoxSpec) -> np.ndarray:
    pts = _BOX_POINTS.get(spec)
    if pts is None:
        pts = _BOX_POINTS[spec] = _box_points(spec)
    return pts


def box_edge_pairs(spec: BoxSpec, marks: list[np.ndarray]) -> np.ndarray:
    """Endpoint ids ``(m, 2)`` of the open cables given per-axis box marks."""
    strides = np.array([spec.side ** (spec.d - 1 - a) for a in range(spec.d)])
    pairs = []
    for a, m in enumerate(marks):
        pad = [(0, 0)] * spec.d
        pad[a] = (0, 1)
        u = np.flatnonzero(np.pad(m, pad))
        pairs.append(np.stack([u, u + strides[a]], axis=1))
    return np.concatenate(pairs)


def extract_box_clusters(spec: BoxSpec, marks: list[np.ndarray]) -> ClusterReport:
    """Clusters of a box sample given per-axis interior cable marks."""
    pairs = box_edge_pairs(spec, marks)
    keep = np.ones(pairs.shape[0], dtype=np.bool_)
    labels = _union_pairs(spec.n_vertices, pairs[:, 0].copy(), pairs[:, 1].copy(), keep)
    return ClusterReport.from_min_labels(labels, box_points(spec))


def shifted_box_ids(spec: BoxSpec, half_width: float, shift: float, axis: int = 0) -> np.ndarray:
    """Lattice ids of ``[-w, w]^d + shift e_axis`` (real box, integer points kept)."""
    lo = np.full(spec.d, -half_width, dtype=float)
    hi = np.full(spec.d, half_width, dtype=float)
    lo[axis] += shift
    hi[axis] += shift
    if np.any(lo < -spec.N - 1e-9) or np.any(hi > spec.N + 1e-9):
        raise ValueError("box is not contained in the domain")
    ranges = [np.arange(int(np.ceil(lo[a] - 1e-9)), int(np.floor(hi[a] + 1e-9)) + 1) for a in range(spec.d)]
    grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, spec.d)
    return np.ravel_multi_index(tuple((grid + spec.N).T), spec.shape)


def separated_boxes(spec: BoxSpec) -> tuple[np.ndarray, np.ndarray]:
    """The two boxes ``Lambda_{N/4}`` shifted by ``-N/2`` and ``+N/2`` along axis 0."""
    return (shifted_box_ids(spec, spec.N / 4, -spec.N / 2),
            shifted_box_ids(spec, spec.N / 4, spec.N / 2))

"""Finite subdomains of Z^d and their cable-graph edge structure.

Interior vertices carry dense ids ``0..n-1`` in lexicographic order of their
coordinates.  Every boundary vertex is collapsed onto one absorbing sink whose
id is ``n``.  Edges are unit axis-aligned segments with at least one interior
endpoint; they are numbered in lexicographic order of (lower endpoint, axis).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_VERTEX_BUDGET = 10_000_000


class CapacityError(ValueError):
    """Raised when a domain would exceed the configured vertex budget."""


@dataclass(frozen=True)
class BoxSpec:
    """The box ``[-N, N]^d`` of Z^d."""

    d: int
    N: int

    def __post_init__(self):
        if int(self.d) < 1 or int(self.N) < 1:
            raise ValueError(f"BoxSpec needs d >= 1 and N >= 1, got d={self.d}, N={self.N}")

    @property
    def side(self) -> int:
        return 2 * self.N + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.d

    @property
    def n_vertices(self) -> int:
        return self.side ** self.d

    def index(self, point) -> int:
        """Flat id of a lattice point of the box (lexicographic order)."""
        p = np.asarray(point, dtype=np.int64) + self.N
        if p.shape != (self.d,) or np.any(p < 0) or np.any(p >= self.side):
            raise KeyError(f"{tuple(np.asarray(point).tolist())} is not in the box")
        return int(np.ravel_multi_index(tuple(p), self.shape))

    def point(self, idx: int) -> tuple[int, ...]:
        return tuple(int(c) - self.N for c in np.unravel_index(int(idx), self.shape))

    def to_dict(self) -> dict:
        return {"kind": "box", "d": self.d, "N": self.N}


class LatticeDomain:
    """Interior vertex set of Z^d with its boundary shell and cable edges.

    Instances are immutable after construction.  Expensive derived arrays
    (edges, adjacency) are built on first use.
    """

    def __init__(self, points, *, box: BoxSpec | None = None, path_k: int | None = None):
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a non-empty (n, d) integer array")
        order = np.lexsort(pts.T[::-1])
        pts = pts[order]
        if np.any(np.all(pts[1:] == pts[:-1], axis=1)):
            raise ValueError("duplicate lattice points")
        pts.setflags(write=False)
        self.points = pts
        self.d = pts.shape[1]
        self.box = box
        self.path_k = path_k

    # -- identity ---------------------------------------------------------

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def sink(self) -> int:
        return self.n

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        if self.box is not None:
            return f"LatticeDomain(box d={self.box.d} N={self.box.N})"
        if self.path_k is not None:
            return f"LatticeDomain(path k={self.path_k})"
        return f"LatticeDomain(d={self.d}, n={self.n})"

    def to_dict(self) -> dict:
        if self.box is not None:
            return self.box.to_dict()
        if self.path_k is not None:
            return {"kind": "path", "k": self.path_k}
        return {"kind": "points", "points": self.points.tolist()}

    # -- point <-> id -----------------------------------------------------

    @cached_property
    def _keys(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.points.min(axis=0) - 1
        span = self.points.max(axis=0) - lo + 2
        return lo, span

    def _encode(self, pts: np.ndarray) -> np.ndarray:
        lo, span = self._keys
        shifted = pts - lo
        key = np.zeros(pts.shape[0], dtype=np.int64)
        for a in range(self.d):
            key = key * span[a] + shifted[:, a]
        return key

    @cached_property
    def _sorted_keys(self) -> np.ndarray:
        # lexicographic order of points == increasing mixed-radix key
        return self._encode(self.points)

    def lookup(self, pts) -> np.ndarray:
        """Ids of an ``(m, d)`` array of points; ``-1`` where not interior."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        if self.box is not None:
            N, side = self.box.N, self.box.side
            q = pts + N
            inside = np.all((q >= 0) & (q < side), axis=1)
            out = np.full(pts.shape[0], -1, dtype=np.int64)
            if inside.any():
                out[inside] = np.ravel_multi_index(tuple(q[inside].T), self.box.shape)
            return out
        lo, span = self._keys
        shifted = pts - lo
        ok = np.all((shifted >= 0) & (shifted < span), axis=1)
        out = np.full(pts.shape[0], -1, dtype=np.int64)
        if ok.any():
            keys = self._encode(pts[ok])
            pos = np.searchsorted(self._sorted_keys, keys)
            pos = np.minimum(pos, self.n - 1)
            hit = self._sorted_keys[pos] == keys
            sub = np.where(hit, pos, -1)
            out[ok] = sub
        return out

    def index(self, point) -> int:
        idx = int(self.lookup(np.asarray(point).reshape(1, -1))[0])
        if idx < 0:
            raise KeyError(f"{tuple(np.asarray(point).tolist())} is not an interior vertex")
        return idx

    def point(self, idx: int) -> tuple[int, ...]:
        if not 0 <= idx < self.n:
            raise KeyError(f"unknown vertex id {idx}")
        return tuple(int(c) for c in self.points[idx])

    # -- boundary and edges -----------------------------------------------

    @cached_property
    def boundary(self) -> np.ndarray:
        """Lattice points at L1-distance exactly 1 from the interior."""
        cand = []
        for a in range(self.d):
            for s in (-1, 1):
                q = self.points.copy()
                q[:, a] += s
                cand.append(q[self.lookup(q) < 0])
        b = np.unique(np.concatenate(cand), axis=0)
        b.setflags(write=False)
        return b

    @cached_property
    def _adjacency(self) -> np.ndarray:
        # slot 2a is the -e_a neighbour, slot 2a+1 the +e_a neighbour
        n, d = self.n, self.d
        nbr = np.empty((n, 2 * d), dtype=np.int64)
        for a in range(d):
            for j, s in enumerate((-1, 1)):
                q = self.points.copy()
                q[:, a] += s
                ids = self.lookup(q)
                nbr[:, 2 * a + j] = np.where(ids < 0, n, ids)
        return nbr

    @cached_property
    def _edge_table(self):
        n, d = self.n, self.d
        nbr = self._adjacency
        lower_pts, axes, ends = [], [], []
        slot_rows, slot_cols = [], []
        for a in range(d):
            up = nbr[:, 2 * a + 1]
            down = nbr[:, 2 * a]
            # edge {x, x+e_a}: lower endpoint x
            rows = np.arange(n)
            lower_pts.append(self.points)
            axes.append(np.full(n, a))
            ends.append(np.stack([rows, up], axis=1))
            slot_rows.append(rows)
            slot_cols.append(np.full(n, 2 * a + 1))
            # edge {x-e_a, x} with x-e_a on the boundary: lower endpoint is the boundary point
            b = np.flatnonzero(down == n)
            q = self.points[b].copy()
            q[:, a] -= 1
            lower_pts.append(q)
            axes.append(np.full(b.size, a))
            ends.append(np.stack([np.full(b.size, n), b], axis=1))
            slot_rows.append(b)
            slot_cols.append(np.full(b.size, 2 * a))
        lower = np.concatenate(lower_pts)
        axis = np.concatenate(axes)
        ends = np.concatenate(ends)
        rows = np.concatenate(slot_rows)
        cols = np.concatenate(slot_cols)
        order = np.lexsort((axis,) + tuple(lower.T[::-1]))
        ends, axis, rows, cols = ends[order], axis[order], rows[order], cols[order]
        nbr_edge = np.full((n, 2 * d), -1, dtype=np.int64)
        eid = np.arange(ends.shape[0])
        nbr_edge[rows, cols] = eid
        # the other side of interior-interior edges
        inner = (ends[:, 0] < n) & (ends[:, 1] < n)
        a_in = axis[inner]
        nbr_edge[ends[inner, 1], 2 * a_in] = eid[inner]
        for arr in (ends, axis, nbr_edge):
            arr.setflags(write=False)
        return ends, axis, nbr_edge

    @property
    def edges(self) -> np.ndarray:
        """``(E, 2)`` endpoint ids; the sink id ``n`` stands for any boundary point."""
        return self._edge_table[0]

    @property
    def edge_axis(self) -> np.ndarray:
        return self._edge_table[1]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def neighbor_table(self) -> np.ndarray:
        """``(n, 2d)`` neighbour ids, sink for boundary neighbours."""
        return self._adjacency

    @property
    def neighbor_edges(self) -> np.ndarray:
        """``(n, 2d)`` edge ids matching :attr:`neighbor_table`."""
        return self._edge_table[2]

    @cached_property
    def inner_edges(self) -> np.ndarray:
        """Ids of edges with both endpoints interior."""
        return np.flatnonzero((self.edges[:, 0] < self.n) & (self.edges[:, 1] < self.n))

    def is_connected(self) -> bool:
        nbr = self.neighbor_table
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            v = stack.pop()
            for w in nbr[v]:
                if w < self.n and not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        return bool(seen.all())


def _check_budget(n: int, budget: int) -> None:
    if n > budget:
        raise CapacityError(f"domain has {n} vertices, over the budget of {budget}")


def build_box(spec: BoxSpec, vertex_budget: int = DEFAULT_VERTEX_BUDGET) -> LatticeDomain:
    """The box Lambda_N = [-N, N]^d with its boundary shell and edges."""
    _check_budget(spec.n_vertices, vertex_budget)
    grids = np.indices(spec.shape, dtype=np.int64).reshape(spec.d, -1).T - spec.N
    return LatticeDomain(grids, box=spec)


def build_path(k: int) -> LatticeDomain:
    """Interior ``{1..k}`` of Z with boundary ``{0, k+1}``."""
    if k < 1:
        raise ValueError("path needs k >= 1")
    return LatticeDomain(np.arange(1, k + 1).reshape(-1, 1), path_k=k)


def from_points(points, vertex_budget: int = DEFAULT_VERTEX_BUDGET) -> LatticeDomain:
    """Explicit small vertex set; must be nearest-neighbour connected."""
    dom = LatticeDomain(points)
    _check_budget(dom.n, vertex_budget)
    if not dom.is_connected():
        raise ValueError("interior vertex set is not connected")
    return dom


def neighbors(dom: LatticeDomain, v: int) -> list[tuple[int, int]]:
    """``(neighbour id or sink, edge id)`` pairs of an interior vertex."""
    if not 0 <= v < dom.n:
        raise KeyError(f"unknown vertex id {v}")
    return [(int(w), int(e)) for w, e in zip(dom.neighbor_table[v], dom.neighbor_edges[v])]


def domain_from_dict(spec: dict, vertex_budget: int = DEFAULT_VERTEX_BUDGET) -> LatticeDomain:
    kind = spec.get("kind", "box")
    if kind == "box":
        return build_box(BoxSpec(int(spec["d"]), int(spec["N"])), vertex_budget)
    if kind == "path":
        return build_path(int(spec["k"]))
    if kind == "points":
        return from_points(spec["points"], vertex_budget)
    raise ValueError(f"unknown domain kind {kind!r}")

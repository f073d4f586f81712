"""Random-walk loop soup at intensity 1/2 and its occupation field.

Loops are sampled by the rooted decomposition: with vertices visited in a
fixed order ``x_1, x_2, ...``, loops whose minimal vertex is ``x_i`` live in
``D_i = D minus {x_1..x_{i-1}}``.  Their number is Poisson with mean
``alpha * log G_{D_i}(x_i, x_i)``; each loop returns to ``x_i`` a
logarithmically distributed number of times, and every excursion is a walk
from ``x_i`` conditioned (Doob transform by the hitting probability of
``x_i``) to come back before leaving ``D_i``.

Occupation times use the continuous-time walk with unit conductances: each
visit holds for an Exp(mean 1/(2d)) time and trivial loops add an
independent Gamma(1/2, scale 1/(2d)) at every vertex.  With this
normalization the occupation field has the law of ``phi^2 / 2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .green import killed_green_column, laplacian
from .lattice import LatticeDomain

ALPHA = 0.5
DEFAULT_LOOP_ROUTE_CAP = 2000
MAX_RECORDED_STEPS = 1_000_000
H_TOL = 1e-8
# open probability 1 - exp(-2 sqrt(G_x G_y)) for untraversed cables; equals
# exp(-|phi_x||phi_y|) with |phi| = sqrt(2 Gamma), half the GFF-side exponent
GLUE_COEFFICIENT = 2.0


class HTransformError(RuntimeError):
    pass


@dataclass
class DiscreteLoop:
    """A rooted discrete loop; ``steps`` is the cyclic vertex sequence from the root."""

    root: int
    length: int
    steps: np.ndarray | None = None
    sample: int = 0

    def vertices(self) -> np.ndarray:
        if self.steps is None:
            raise ValueError("loop steps were not recorded")
        return np.unique(self.steps)


@dataclass
class LoopSoupSample:
    """A block of loop-soup samples; leading axis indexes samples."""

    visits: np.ndarray
    edge_traversals: np.ndarray
    gamma: np.ndarray | None = None
    glue_open: np.ndarray | None = None
    loops: list[list[DiscreteLoop]] | None = None
    loop_counts: np.ndarray | None = None


class RootedDecomposition:
    """Per-vertex killed Green values and excursion kernels for one ordering."""

    def __init__(self, dom: LatticeDomain, order=None, max_vertices: int = DEFAULT_LOOP_ROUTE_CAP):
        if dom.n > max_vertices:
            raise ValueError(f"loop route is limited to {max_vertices} vertices (domain has {dom.n})")
        n, d = dom.n, dom.d
        self.domain = dom
        self.order = np.arange(n) if order is None else np.asarray(order, dtype=np.int64)
        if sorted(self.order.tolist()) != list(range(n)):
            raise ValueError("order must be a permutation of the vertex ids")
        nbr = dom.neighbor_table
        self.neighbors = nbr
        self.neighbor_edges = dom.neighbor_edges
        self.g_root = np.empty(n)
        self.cum = np.empty((n, n, 2 * d))
        active = np.ones(n, dtype=bool)
        for i, x in enumerate(self.order):
            idx = np.flatnonzero(active)
            L = laplacian(dom, active)
            col = killed_green_column(L, d, int(np.searchsorted(idx, x)))
            g = np.zeros(n + 1)
            g[idx] = col
            gxx = g[x]
            if not gxx >= 1 - 1e-12:
                raise HTransformError(f"killed Green value {gxx} < 1 at vertex {x}")
            h = g / gxx
            self.g_root[i] = gxx
            w = h[nbr] / (2 * d)
            tot = w.sum(axis=1)
            expect = h[:n].copy()
            expect[x] = 1.0 - 1.0 / gxx
            live = active.copy()
            if live.any():
                err = np.abs(tot[live] - expect[live])
                if np.any(err > H_TOL * np.maximum(expect[live], 1.0)):
                    raise HTransformError(f"h-transform rows do not normalize at root {x}")
            safe = np.where(tot > 0, tot, 1.0)
            cum = np.cumsum(w / safe[:, None], axis=1)
            cum[:, -1] = 1.0
            self.cum[i] = cum
            active[x] = False
        self.return_prob = 1.0 - 1.0 / self.g_root
        self.loop_mass = np.log(self.g_root)

    @property
    def n(self) -> int:
        return self.domain.n

    def sample_block(self, rng: np.random.Generator, size: int, alpha: float = ALPHA,
                     record: bool = False) -> LoopSoupSample:
        n, E = self.n, self.domain.n_edges
        counts = rng.poisson(alpha * self.loop_mass, size=(size, n))
        visit_keys = []
        trav_keys = []
        recorded = [[] for _ in range(size)] if record else None
        for i in range(n):
            R = self.return_prob[i]
            c = counts[:, i]
            total = int(c.sum())
            if total == 0 or R <= 0:
                continue
            x = int(self.order[i])
            loop_samp = np.repeat(np.arange(size), c)
            nexc = rng.logseries(R, size=total)
            exc_loop = np.repeat(np.arange(total), nexc)
            exc_samp = loop_samp[exc_loop]
            steps_v, steps_e, steps_t = self._walk(i, x, exc_samp.size, rng)
            visit_keys.append(exc_samp[steps_e] * n + steps_v)
            trav_keys.append(exc_samp[steps_e] * E + steps_t)
            if record:
                self._record(recorded, x, loop_samp, exc_loop, steps_v, steps_e)
        visits = np.zeros((size, n), dtype=np.int64)
        trav = np.zeros((size, E), dtype=np.int64)
        if visit_keys:
            visits += np.bincount(np.concatenate(visit_keys), minlength=size * n).reshape(size, n)
            trav += np.bincount(np.concatenate(trav_keys), minlength=size * E).reshape(size, E)
        return LoopSoupSample(visits=visits, edge_traversals=trav, loops=recorded,
                              loop_counts=counts[:, np.argsort(self.order)])

    def _walk(self, i: int, x: int, m: int, rng: np.random.Generator):
        """Run ``m`` excursions from ``x``; returns (vertex, excursion, edge) per step.

        The vertex of a step is where the walker stands before jumping, so the
        final return to ``x`` is not counted as a visit.
        """
        cum = self.cum[i]
        nbr = self.neighbors
        nedge = self.neighbor_edges
        pos = np.full(m, x, dtype=np.int64)
        alive = np.arange(m)
        vs, es, ts = [], [], []
        while alive.size:
            vs.append(pos)
            es.append(alive)
            r = rng.random(alive.size)
            slot = (r[:, None] >= cum[pos]).sum(axis=1)
            slot = np.minimum(slot, cum.shape[1] - 1)
            ts.append(nedge[pos, slot])
            nxt = nbr[pos, slot]
            if np.any(nxt >= self.n):
                raise HTransformError("conditioned excursion stepped onto the boundary")
            keep = nxt != x
            pos = nxt[keep]
            alive = alive[keep]
        return np.concatenate(vs), np.concatenate(es), np.concatenate(ts)

    def _record(self, recorded, x, loop_samp, exc_loop, steps_v, steps_e):
        # steps of one excursion appear in walk order, excursions of one loop consecutively
        order = np.argsort(steps_e, kind="stable")
        v_sorted = steps_v[order]
        loop_of_step = exc_loop[steps_e[order]]
        bounds = np.flatnonzero(np.diff(loop_of_step)) + 1
        for j, seq in zip(np.unique(loop_of_step), np.split(v_sorted, bounds)):
            s = int(loop_samp[j])
            steps = seq if seq.size <= MAX_RECORDED_STEPS else None
            recorded[s].append(DiscreteLoop(root=x, length=int(seq.size), steps=steps, sample=s))


def sample_loops(dom: LatticeDomain, rng: np.random.Generator, alpha: float = ALPHA,
                 decomposition: RootedDecomposition | None = None) -> list[DiscreteLoop]:
    """Nontrivial loops of one soup sample, with step sequences."""
    dec = decomposition or RootedDecomposition(dom)
    return dec.sample_block(rng, 1, alpha=alpha, record=True).loops[0]


def loop_visits(loops: list[DiscreteLoop], n: int) -> np.ndarray:
    v = np.zeros(n, dtype=np.int64)
    for lp in loops:
        np.add.at(v, lp.steps, 1)
    return v


def accumulate_gamma(visits, dom: LatticeDomain, rng: np.random.Generator) -> np.ndarray:
    """Occupation field from visit counts (array, any leading shape) or a loop list.

    A vertex visited ``v`` times gets ``Gamma(1/2, s) + sum of v Exp(s)``
    with ``s = 1/(2d)``, drawn in one shot as ``Gamma(1/2 + v, s)``.
    """
    if isinstance(visits, list):
        visits = loop_visits(visits, dom.n)
    visits = np.asarray(visits)
    return rng.gamma(0.5 + visits, 1.0 / (2 * dom.d))


def glue_edges(gamma: np.ndarray, traversals: np.ndarray, edges: np.ndarray,
               rng: np.random.Generator, glue: float = GLUE_COEFFICIENT) -> np.ndarray:
    """Cable-level connectivity of each edge given the discrete soup.

    Traversed edges are open.  An untraversed edge is open with probability
    ``1 - exp(-glue * sqrt(Gamma_x Gamma_y))``.  The sink has zero occupation,
    so boundary cables stay closed.
    """
    occ = np.concatenate([gamma, np.zeros(gamma.shape[:-1] + (1,))], axis=-1)
    prod = np.sqrt(occ[..., edges[:, 0]] * occ[..., edges[:, 1]])
    u = rng.random(prod.shape)
    return (traversals > 0) | ((prod > 0) & (u >= np.exp(-glue * prod)))


def loop_chain_clusters(loops: list[DiscreteLoop]) -> list[list[int]]:
    """Partition loop indices into classes of loops chained by shared vertices."""
    parent = list(range(len(loops)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    owner: dict[int, int] = {}
    for i, lp in enumerate(loops):
        for v in lp.vertices().tolist():
            j = owner.setdefault(v, i)
            if j != i:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    classes: dict[int, list[int]] = {}
    for i in range(len(loops)):
        classes.setdefault(find(i), []).append(i)
    return sorted(classes.values(), key=lambda c: c[0])


def dump_loops(loops: list[DiscreteLoop], fh) -> None:
    """Debug dump: one line per loop, ``root length v1 v2 ...``."""
    for lp in loops:
        seq = "" if lp.steps is None else " ".join(map(str, lp.steps.tolist()))
        fh.write(f"{lp.root} {lp.length} {seq}".rstrip() + "\n")


@dataclass
class LoopRoute:
    """Full loop-side pipeline for one domain: loops, occupation field, glue."""

    domain: LatticeDomain
    glue: float = GLUE_COEFFICIENT
    order: np.ndarray | None = None
    decomposition: RootedDecomposition = field(init=False)

    def __post_init__(self):
        self.decomposition = RootedDecomposition(self.domain, self.order)

    def sample(self, rng: np.random.Generator, size: int, record: bool = False) -> LoopSoupSample:
        s = self.decomposition.sample_block(rng, size, record=record)
        s.gamma = accumulate_gamma(s.visits, self.domain, rng)
        s.glue_open = glue_edges(s.gamma, s.edge_traversals, self.domain.edges, rng, self.glue)
        return s

"""Dirichlet Green's function of simple random walk and the arcsin connection law.

Two conventions are used side by side:

* ``G(x, y)``: expected number of visits to ``y`` by SRW started at ``x``
  before it leaves the domain;
* ``C = L^{-1} = G / (2d)``: Gaussian covariance for the unit-conductance
  Dirichlet Laplacian ``L = 2d I - A``.

Connection probabilities only depend on ratios of ``G`` and are therefore
convention free.
"""
from __future__ import annotations

import threading
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import BoxSpec, LatticeDomain, build_box

DEFAULT_DENSE_CAP = 5000
SOLVER_TOL = 1e-10


class ConvergenceError(RuntimeError):
    pass


class CorruptGreenTable(ValueError):
    pass


def laplacian(dom: LatticeDomain, active=None) -> sp.csr_matrix:
    """Dirichlet graph Laplacian ``2d I - A`` restricted to the interior.

    ``active`` optionally masks a subset of interior vertices; the others are
    treated as absorbing, like the boundary.
    """
    n, d = dom.n, dom.d
    nbr = dom.neighbor_table
    rows = np.repeat(np.arange(n), 2 * d)
    cols = nbr.ravel()
    keep = cols < n
    if active is not None:
        active = np.asarray(active, dtype=bool)
        keep &= active[rows] & active[np.minimum(cols, n - 1)]
    A = sp.csr_matrix((np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(n, n))
    L = sp.identity(n, format="csr") * (2 * d) - A
    if active is not None:
        idx = np.flatnonzero(active)
        L = L[idx][:, idx]
    return L.tocsr()


def _cg(op: sp.csr_matrix, b: np.ndarray, tol: float, maxiter: int) -> np.ndarray:
    x, info = spla.cg(op, b, rtol=tol, atol=0.0, maxiter=maxiter)
    res = np.linalg.norm(op @ x - b)
    if info != 0 or res > tol * max(np.linalg.norm(b), 1.0):
        raise ConvergenceError(f"CG did not reach residual {tol:g} (info={info}, residual={res:.3g})")
    return x


def green_solve(dom: LatticeDomain, x: int, tol: float = SOLVER_TOL, maxiter: int | None = None) -> np.ndarray:
    """Column ``G(x, .)`` from a CG solve of ``(I - P) g = delta_x``."""
    if not 0 <= x < dom.n:
        raise KeyError(f"unknown vertex id {x}")
    op = laplacian(dom) / (2 * dom.d)
    b = np.zeros(dom.n)
    b[x] = 1.0
    return _cg(op, b, tol, maxiter or 10 * dom.n)


def killed_green_column(L_active: sp.csr_matrix, d: int, x: int, tol: float = SOLVER_TOL) -> np.ndarray:
    """Visit-count Green column on an arbitrary (possibly disconnected) vertex subset."""
    n = L_active.shape[0]
    b = np.zeros(n)
    b[x] = 1.0
    if n <= 400:
        return np.linalg.solve((L_active / (2 * d)).toarray(), b)
    return _cg(L_active / (2 * d), b, tol, 10 * n)


# -- spectral representation on boxes -------------------------------------


def _axis_modes(N: int) -> tuple[np.ndarray, np.ndarray]:
    M = 2 * N + 1
    k = np.arange(1, M + 1)
    mu = 2.0 * (1.0 - np.cos(np.pi * k / (M + 1)))
    j = np.arange(1, M + 1)
    psi = np.sqrt(2.0 / (M + 1)) * np.sin(np.pi * np.outer(j, k) / (M + 1))
    return mu, psi


@lru_cache(maxsize=8)
def spectral_eigenvalues(spec: BoxSpec) -> np.ndarray:
    """Dirichlet Laplacian eigenvalues on the box, as a ``(2N+1,)*d`` grid."""
    mu, _ = _axis_modes(spec.N)
    lam = np.zeros((1,) * spec.d)
    for a in range(spec.d):
        shape = [1] * spec.d
        shape[a] = -1
        lam = lam + mu.reshape(shape)
    lam.setflags(write=False)
    return lam


def dst_ortho(a: np.ndarray, axes=None, workers: int | None = None) -> np.ndarray:
    """Orthonormal multi-axis DST-I; it is its own inverse."""
    return scipy.fft.dstn(a, type=1, norm="ortho", axes=axes, workers=workers)


def green_box_spectral(spec: BoxSpec, x, y) -> float:
    """``G(x, y) = 2d sum_k psi_k(x) psi_k(y) / lambda_k`` on the box."""
    mu, psi = _axis_modes(spec.N)
    xs = np.asarray(x, dtype=int) + spec.N
    ys = np.asarray(y, dtype=int) + spec.N
    prod = np.ones((1,) * spec.d)
    for a in range(spec.d):
        shape = [1] * spec.d
        shape[a] = -1
        prod = prod * (psi[xs[a]] * psi[ys[a]]).reshape(shape)
    return float(2 * spec.d * np.sum(prod / spectral_eigenvalues(spec)))


def green_box_column(spec: BoxSpec, y) -> np.ndarray:
    """Flat column ``G(., y)`` on the box via two DSTs."""
    delta = np.zeros(spec.shape)
    delta[tuple(np.asarray(y, dtype=int) + spec.N)] = 1.0
    coef = dst_ortho(delta) / spectral_eigenvalues(spec)
    return (2 * spec.d) * dst_ortho(coef).ravel()


# -- tables ----------------------------------------------------------------


class GreenTable:
    """Green's function of a domain, dense or column-on-demand.

    Domains with at most ``dense_cap`` vertices get the full matrix up front.
    Larger ones compute columns lazily (spectrally on boxes, by CG otherwise)
    and memoize them under a lock.
    """

    def __init__(self, dom: LatticeDomain, dense_cap: int = DEFAULT_DENSE_CAP):
        self.domain = dom
        self.d = dom.d
        self.dense_cap = dense_cap
        self._columns: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()
        self._chol = None
        if dom.n <= dense_cap:
            L = laplacian(dom).toarray()
            cf = scipy.linalg.cho_factor(L, lower=True)
            C = scipy.linalg.cho_solve(cf, np.eye(dom.n))
            C = 0.5 * (C + C.T)
            self.matrix = (2 * dom.d) * C
            self.mode = "dense"
        else:
            self.matrix = None
            self.mode = "columns"

    @property
    def n(self) -> int:
        return self.domain.n

    def column(self, x: int) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix[:, x]
        with self._lock:
            col = self._columns.get(x)
            if col is None:
                if self.domain.box is not None:
                    col = green_box_column(self.domain.box, self.domain.point(x))
                else:
                    col = green_solve(self.domain, x)
                self._columns[x] = col
        return col

    def __call__(self, x: int, y: int) -> float:
        if self.matrix is not None:
            return float(self.matrix[x, y])
        # columns are symmetric; reuse whichever is cached
        if y in self._columns and x not in self._columns:
            return float(self._columns[y][x])
        return float(self.column(x)[y])

    def diagonal(self, ids) -> np.ndarray:
        return np.array([self(i, i) for i in ids])

    @property
    def covariance(self) -> np.ndarray:
        """Dense ``C = G / (2d)``."""
        if self.matrix is None:
            raise ValueError("covariance needs a dense table")
        return self.matrix / (2 * self.d)

    def covariance_factor(self) -> np.ndarray:
        """Lower Cholesky factor of ``C``, computed once."""
        if self._chol is None:
            try:
                self._chol = np.linalg.cholesky(self.covariance)
            except np.linalg.LinAlgError as exc:
                raise ValueError("Green table is not positive definite") from exc
        return self._chol


def connection_ratio(G: GreenTable, x: int, y: int) -> float:
    r = G(x, y) / np.sqrt(G(x, x) * G(y, y))
    if not (-1e-12 <= r <= 1 + 1e-12) or not np.isfinite(r):
        raise CorruptGreenTable(f"Green ratio {r!r} for ({x}, {y}) is outside [0, 1]")
    return float(min(max(r, 0.0), 1.0))


def arcsin_law(ratio) -> np.ndarray | float:
    """Sheppard's formula ``(2/pi) arcsin(ratio)``."""
    return 2.0 / np.pi * np.arcsin(ratio)


def connection_probability(G: GreenTable, x: int, y: int) -> float:
    """Exact ``P[x <-> y]`` for the cable-graph GFF / loop-soup clusters."""
    if x == y:
        raise ValueError("connection_probability needs x != y")
    return float(arcsin_law(connection_ratio(G, x, y)))


def twopoint_decay_profile(spec: BoxSpec, radii) -> list[tuple[int, float]]:
    """``(r, P[0 <-> r e_1] * r^(d-2))`` along the first axis of the box."""
    if spec.d < 3:
        raise ValueError("two-point decay profile is defined for d >= 3")
    radii = [int(r) for r in radii]
    if any(r < 1 or r > spec.N for r in radii):
        raise ValueError("radii must lie in 1..N")
    origin = (0,) * spec.d
    col = green_box_column(spec, origin)
    dom_index = spec.index
    g00 = col[dom_index(origin)]
    out = []
    for r in radii:
        xr = (r,) + (0,) * (spec.d - 1)
        gxx = green_box_spectral(spec, xr, xr)
        ratio = col[dom_index(xr)] / np.sqrt(g00 * gxx)
        out.append((r, float(arcsin_law(ratio)) * r ** (spec.d - 2)))
    return out


def table_for(spec_or_dom, dense_cap: int = DEFAULT_DENSE_CAP) -> GreenTable:
    dom = build_box(spec_or_dom) if isinstance(spec_or_dom, BoxSpec) else spec_or_dom
    return GreenTable(dom, dense_cap=dense_cap)

"""Cable-graph Gaussian free field: vertex values plus edge zero-hitting marks.

Vertex values have covariance ``C = L^{-1}`` (unit conductances).  Given the
values at the two ends of a unit cable, the field inside is a Brownian
bridge, which avoids zero with probability ``1 - exp(-2 a b)`` when both ends
have the same sign with absolute values ``a`` and ``b``.  That constant is
``EdgeCoupling.kappa``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .green import GreenTable, dst_ortho, spectral_eigenvalues
from .lattice import BoxSpec


@dataclass(frozen=True)
class EdgeCoupling:
    kappa: float = 2.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("zero-hit coefficient kappa must be positive")


@dataclass
class FieldSample:
    phi: np.ndarray
    edge_open: np.ndarray
    stream: tuple[int, int] | None = None

    def check(self, edges: np.ndarray) -> None:
        """Raise unless every open edge joins two same-sign interior vertices."""
        ext = np.concatenate([self.phi, np.zeros(self.phi.shape[:-1] + (1,))], axis=-1)
        prod = ext[..., edges[:, 0]] * ext[..., edges[:, 1]]
        if np.any(self.edge_open & (prod <= 0)):
            raise AssertionError("open edge between opposite signs or to the sink")


def sample_gff_dense(G: GreenTable, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Vertex values ``C^{1/2} z``; shape ``(n,)`` or ``(size, n)``."""
    L = G.covariance_factor()
    z = rng.standard_normal((1 if size is None else size, G.n))
    phi = z @ L.T
    return phi[0] if size is None else phi


def sample_gff_box_spectral(spec: BoxSpec, rng: np.random.Generator, size: int | None = None,
                            z: np.ndarray | None = None, workers: int | None = None) -> np.ndarray:
    """Vertex values ``sum_k z_k psi_k / sqrt(lambda_k)`` via separable DSTs.

    Returns the flat field (lexicographic vertex order), with a leading
    sample axis when ``size`` is given.  ``z`` may be supplied in grid shape.
    """
    lam = spectral_eigenvalues(spec)
    if z is None:
        shape = spec.shape if size is None else (size,) + spec.shape
        z = rng.standard_normal(shape)
    axes = tuple(range(z.ndim - spec.d, z.ndim))
    phi = dst_ortho(z / np.sqrt(lam), axes=axes, workers=workers)
    lead = z.shape[: z.ndim - spec.d]
    return phi.reshape(lead + (spec.n_vertices,))


def mark_edges(edges: np.ndarray, phi: np.ndarray, rng: np.random.Generator,
               coupling: EdgeCoupling = EdgeCoupling()) -> np.ndarray:
    """Open/closed mark per edge for one field or a batch of fields.

    ``edges`` uses the sink id ``n`` for boundary endpoints, where the field
    is zero, so boundary cables always come out closed.
    """
    ext = np.concatenate([phi, np.zeros(phi.shape[:-1] + (1,))], axis=-1)
    prod = ext[..., edges[:, 0]] * ext[..., edges[:, 1]]
    u = rng.random(prod.shape)
    return (prod > 0) & (u >= np.exp(-coupling.kappa * np.maximum(prod, 0.0)))


def mark_box_edges(spec: BoxSpec, phi: np.ndarray, rng: np.random.Generator,
                   coupling: EdgeCoupling = EdgeCoupling()) -> list[np.ndarray]:
    """Per-axis marks of the interior-interior cables of a box.

    ``phi`` is one flat field.  Entry ``a`` has the grid shape with axis ``a``
    shortened to ``2N``; index ``i`` along it marks the cable ``(i, i+1)``.
    Boundary cables are closed and not represented.
    """
    grid = phi.reshape(spec.shape)
    marks = []
    for a in range(spec.d):
        lo = np.take(grid, np.arange(spec.side - 1), axis=a)
        hi = np.take(grid, np.arange(1, spec.side), axis=a)
        prod = lo * hi
        u = rng.random(prod.shape)
        marks.append((prod > 0) & (u >= np.exp(-coupling.kappa * np.maximum(prod, 0.0))))
    return marks


def signed_field(phi: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Replace each cluster's sign by an independent fair coin.

    ``labels`` holds any integer cluster label per vertex in ``0..n-1`` (for
    instance the minimal vertex id of the cluster), with the same leading
    shape as ``phi``.
    """
    phi2 = np.atleast_2d(phi)
    lab2 = np.atleast_2d(labels)
    B, n = phi2.shape
    rows = np.arange(B)[:, None]
    sgn = np.sign(phi2)
    ref = np.zeros((B, n))
    ref[rows, lab2] = sgn
    if np.any(ref[rows, lab2] != sgn):
        raise ValueError("cluster labels are not sign-constant")
    coins = np.where(rng.random((B, n)) < 0.5, -1.0, 1.0)
    out = coins[rows, lab2] * np.abs(phi2)
    return out.reshape(phi.shape)

"""Empirical counterparts of the limit objects.

Degree histogram, exact triangle counts, global clustering, the
degree-resolved clustering spectrum, and connected-component summaries of
an overlay graph's union edge set.  Undefined ratios (no node of the
requested degree, no two-star anywhere) are reported as None, never
imputed as 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .pmf import Pmf
from .sampling import OverlayGraph

__all__ = [
    "ComponentSummary",
    "empirical_degree_distribution",
    "triangle_count",
    "per_node_triangles",
    "global_clustering",
    "empirical_clustering_spectrum",
    "components",
    "spectrum_sums",
]


def _adjacency(g: OverlayGraph) -> sp.csr_matrix:
    e = g.union_edges
    n = g.n
    if len(e) == 0:
        return sp.csr_matrix((n, n), dtype=np.int64)
    data = np.ones(2 * len(e), dtype=np.int64)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def empirical_degree_distribution(g: OverlayGraph) -> Pmf:
    """Frequency distribution of union-graph degrees over all n nodes."""
    deg = g.degrees()
    hist = np.bincount(deg) / g.n
    return Pmf(0, hist, 0.0)


def per_node_triangles(g: OverlayGraph) -> np.ndarray:
    """Number of triangles through each node, exactly."""
    if len(g.union_edges) == 0:
        return np.zeros(g.n, dtype=np.int64)
    a = _adjacency(g)
    paths = a @ a
    closed = paths.multiply(a)  # (i, j) entries counting i-k-j paths with i~j
    tri2 = np.asarray(closed.sum(axis=1)).ravel()
    return (tri2 // 2).astype(np.int64)


def triangle_count(g: OverlayGraph) -> int:
    """Exact number of unordered triangles in the union graph."""
    return int(per_node_triangles(g).sum() // 3)


def global_clustering(g: OverlayGraph) -> float | None:
    """6 * triangles / (ordered two-stars); None when no node has degree >= 2."""
    deg = g.degrees()
    stars = int(np.dot(deg, deg - 1))
    if stars == 0:
        return None
    return 6.0 * triangle_count(g) / stars


def spectrum_sums(g: OverlayGraph, ts: list[int]) -> dict[int, tuple[int, int]]:
    """(closed, total) ordered-triple counts at each requested hub degree.

    closed = sum over degree-t nodes of 2 * triangles at the node,
    total = (number of degree-t nodes) * t (t-1).  Ratios of pooled sums
    across replicates estimate the clustering spectrum.
    """
    deg = g.degrees()
    tri = per_node_triangles(g)
    out: dict[int, tuple[int, int]] = {}
    for t in ts:
        if t < 2:
            raise ValueError("spectrum degrees start at 2")
        mask = deg == t
        cnt = int(mask.sum())
        out[t] = (int(2 * tri[mask].sum()), cnt * t * (t - 1))
    return out


def empirical_clustering_spectrum(g: OverlayGraph, t: int) -> float | None:
    """Fraction of closed ordered triples among those hubbed at degree-t nodes."""
    closed, total = spectrum_sums(g, [t])[t]
    if total == 0:
        return None
    return closed / total


@dataclass(frozen=True)
class ComponentSummary:
    """Connected-component structure of the union graph."""

    sizes: np.ndarray  # all component sizes, descending
    n1: int
    n2: int
    b_counts: dict[int, int]  # threshold -> number of nodes in components larger than it

    @property
    def component_count(self) -> int:
        return len(self.sizes)


def components(g: OverlayGraph, thresholds: list[int] | None = None) -> ComponentSummary:
    """Exact component sizes, the two largest, and large-component node counts."""
    thresholds = thresholds or []
    if g.n == 0:
        return ComponentSummary(np.empty(0, dtype=np.int64), 0, 0, {t: 0 for t in thresholds})
    _, labels = connected_components(_adjacency(g), directed=False)
    sizes = np.sort(np.bincount(labels))[::-1].astype(np.int64)
    n1 = int(sizes[0])
    n2 = int(sizes[1]) if len(sizes) > 1 else 0
    b = {t: int(sizes[sizes > t].sum()) for t in thresholds}
    return ComponentSummary(sizes, n1, n2, b)

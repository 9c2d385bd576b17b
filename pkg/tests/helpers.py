"""Shared test oracles, kept independent of the code paths they check."""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

from overlaysim.sampling import OverlayGraph, _dedupe


@lru_cache(maxsize=None)
def _component_tables(x: int) -> np.ndarray:
    """counts[t, e]: number of edge configurations of the (x+1)-node graph
    with e edges present in which node 0's component has size t+1."""
    nodes = x + 1
    pairs = list(combinations(range(nodes), 2))
    counts = np.zeros((nodes, len(pairs) + 1), dtype=np.int64)
    for mask in range(1 << len(pairs)):
        adj = [[] for _ in range(nodes)]
        e = 0
        for idx, (a, b) in enumerate(pairs):
            if mask >> idx & 1:
                adj[a].append(b)
                adj[b].append(a)
                e += 1
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        counts[len(seen) - 1, e] += 1
    return counts


def enumerated_bin_plus(x: int, y: float) -> np.ndarray:
    """Transitive-closure degree law by exhaustive enumeration of all
    2^C(x+1,2) edge configurations; weights indexed by degree t = 0..x."""
    counts = _component_tables(x)
    n_pairs = counts.shape[1] - 1
    probs = np.array([y**e * (1 - y) ** (n_pairs - e) for e in range(n_pairs + 1)])
    return counts @ probs


def gw_survival_bisect(f_weights: np.ndarray, offset: int = 0, tol: float = 1e-14) -> float:
    """Survival probability via bisection on phi(s) - s, independent of the
    monotone-iteration implementation."""
    support = np.arange(offset, offset + len(f_weights), dtype=np.float64)
    mean = float(np.dot(support, f_weights))
    if mean <= 1.0:
        return 0.0

    def g(s: float) -> float:
        return float(np.dot(s**support, f_weights)) - s

    lo, hi = 0.0, 1.0 - 1e-13
    assert g(lo) >= 0 and g(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 1.0 - 0.5 * (lo + hi)


def make_graph(n: int, layers: list[tuple[list[int], list[tuple[int, int]]]], strengths=None) -> OverlayGraph:
    """Hand-built overlay graph from explicit (nodes, edges) layers."""
    m = len(layers)
    node_lists = [np.asarray(nodes, dtype=np.int64) for nodes, _ in layers]
    edge_lists = []
    for _, edges in layers:
        if edges:
            arr = np.asarray([[min(a, b), max(a, b)] for a, b in edges], dtype=np.int64)
        else:
            arr = np.empty((0, 2), dtype=np.int64)
        edge_lists.append(arr)
    node_ptr = np.zeros(m + 1, dtype=np.int64)
    node_ptr[1:] = np.cumsum([len(v) for v in node_lists]) if m else 0
    edge_ptr = np.zeros(m + 1, dtype=np.int64)
    edge_ptr[1:] = np.cumsum([len(e) for e in edge_lists]) if m else 0
    layer_nodes = np.concatenate(node_lists) if m else np.empty(0, dtype=np.int64)
    layer_edges = (
        np.concatenate(edge_lists) if any(len(e) for e in edge_lists) else np.empty((0, 2), dtype=np.int64)
    )
    union_edges, union_mult = _dedupe(layer_edges, max(n, 1))
    return OverlayGraph(
        n=n,
        node_ptr=node_ptr,
        layer_nodes=layer_nodes,
        edge_ptr=edge_ptr,
        layer_edges=layer_edges,
        layer_strengths=np.array(strengths if strengths is not None else [0.5] * m),
        union_edges=union_edges,
        union_mult=union_mult,
        seed_info={"generator": "manual", "master_seed": 0, "replicate": 0},
    )


def mc_component_mean(k: int, y: float, reps: int, seed: int = 0) -> float:
    """Monte Carlo mean transitive degree in a Bernoulli graph on k nodes."""
    rng = np.random.default_rng(seed)
    tot = 0
    for _ in range(reps):
        undiscovered = k - 1
        queue = 1
        size = 1
        while queue > 0 and undiscovered > 0:
            z = rng.binomial(undiscovered, y)
            undiscovered -= z
            size += z
            queue += z - 1
        tot += size - 1
    return tot / reps

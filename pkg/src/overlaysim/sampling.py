"""Sampling the multilayer model and its site/bond percolations.

Each layer is a Bernoulli graph on a uniformly random x-subset of the n
nodes, with independent intra-layer links of probability y.  The overlay
is the deduplicated union of the layer edge sets.  Graphs are stored in a
flat CSR-style layout so that 10^5-node instances stay cheap, and the
union edge set keeps multiplicities because the bond-percolation coupling
needs them.

Randomness is drawn from counter-based Philox streams derived from
(master seed, replicate, purpose), so regenerating with the same config
and replicate index is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .config import ExperimentConfig
from .layers import LayerTypeDistribution

__all__ = [
    "OverlayGraph",
    "generate",
    "site_percolate",
    "bond_percolate_overlay",
    "bond_percolate_layerwise",
    "coupled_bond_pair",
]

# purpose ids for derived RNG streams
_PURPOSE_TYPES = 0
_PURPOSE_MEMBERSHIP = 1
_PURPOSE_EDGES = 2
_PURPOSE_SITE = 3
_PURPOSE_BOND = 4

GENERATOR_NAME = "philox4x64"


def _stream(master_seed: int, replicate: int, purpose: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(replicate, purpose))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class OverlayGraph:
    """An overlay of Bernoulli layers in flat CSR-style arrays.

    layer k occupies ``layer_nodes[node_ptr[k]:node_ptr[k+1]]`` and
    ``layer_edges[edge_ptr[k]:edge_ptr[k+1]]`` (rows are (u, v) with u < v,
    global node ids).  ``union_edges`` is the sorted deduplicated union;
    ``union_mult[i]`` counts how many layers carry that edge.
    """

    n: int
    node_ptr: np.ndarray
    layer_nodes: np.ndarray
    edge_ptr: np.ndarray
    layer_edges: np.ndarray
    layer_strengths: np.ndarray
    union_edges: np.ndarray
    union_mult: np.ndarray
    seed_info: dict
    node_map: np.ndarray | None = None  # original ids, set by site percolation

    @property
    def m(self) -> int:
        return len(self.node_ptr) - 1

    @property
    def layer_sizes(self) -> np.ndarray:
        return np.diff(self.node_ptr)

    def layer_nodes_of(self, k: int) -> np.ndarray:
        return self.layer_nodes[self.node_ptr[k] : self.node_ptr[k + 1]]

    def layer_edges_of(self, k: int) -> np.ndarray:
        return self.layer_edges[self.edge_ptr[k] : self.edge_ptr[k + 1]]

    def degrees(self) -> np.ndarray:
        return np.bincount(self.union_edges.ravel(), minlength=self.n).astype(np.int64)

    def validate(self) -> None:
        """Check structural invariants; raises AssertionError on violation."""
        assert self.node_ptr[0] == 0 and self.edge_ptr[0] == 0
        assert np.all(np.diff(self.node_ptr) >= 0) and np.all(np.diff(self.edge_ptr) >= 0)
        if len(self.layer_nodes):
            assert 0 <= self.layer_nodes.min() and self.layer_nodes.max() < self.n
        for k in range(self.m):
            nodes = self.layer_nodes_of(k)
            assert len(np.unique(nodes)) == len(nodes), f"layer {k} repeats a node"
            edges = self.layer_edges_of(k)
            if len(edges):
                member = np.isin(edges, nodes)
                assert member.all(), f"layer {k} has an edge leaving its node set"
                assert np.all(edges[:, 0] < edges[:, 1])
        expect = _dedupe(self.layer_edges, self.n)
        assert np.array_equal(expect[0], self.union_edges)
        assert np.array_equal(expect[1], self.union_mult)


def _dedupe(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Sorted unique (u, v) rows plus multiplicities."""
    if len(edges) == 0:
        return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64)
    code = edges[:, 0].astype(np.int64) * n + edges[:, 1].astype(np.int64)
    uniq, mult = np.unique(code, return_counts=True)
    out = np.stack([uniq // n, uniq % n], axis=1)
    return out, mult


def _distinct_rows(rng: np.random.Generator, k: int, x: int, n: int) -> np.ndarray:
    """k rows of x distinct node ids, uniform over x-subsets of range(n)."""
    if x == 0:
        return np.empty((k, 0), dtype=np.int64)
    if x == 1:
        return rng.integers(0, n, size=(k, 1))
    if x * (x - 1) > n:  # collision rejection would thrash; sample directly
        return np.stack([rng.choice(n, size=x, replace=False) for _ in range(k)])
    mat = rng.integers(0, n, size=(k, x))
    while True:
        srt = np.sort(mat, axis=1)
        bad = np.nonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))[0]
        if len(bad) == 0:
            return mat
        mat[bad] = rng.integers(0, n, size=(len(bad), x))


def _pair_decode(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decode pair index e = i(i-1)/2 + j (0 <= j < i) into (i, j)."""
    i = np.floor((1.0 + np.sqrt(1.0 + 8.0 * e.astype(np.float64))) / 2.0).astype(np.int64)
    # guard against float rounding at triangular boundaries
    over = e < i * (i - 1) // 2
    i[over] -= 1
    under = e >= i * (i + 1) // 2
    i[under] += 1
    j = e - i * (i - 1) // 2
    return i, j


def _distinct_ints(rng: np.random.Generator, count: int, upper: int) -> np.ndarray:
    """count distinct uniform draws from range(upper); count << upper."""
    out = np.unique(rng.integers(0, upper, size=count))
    while len(out) < count:
        extra = rng.integers(0, upper, size=count - len(out))
        out = np.unique(np.concatenate([out, extra]))
    return out


def _resolve_types(cfg: ExperimentConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if cfg.explicit_types is not None:
        xs = np.array([x for x, _ in cfg.explicit_types], dtype=np.int64)
        ys = np.array([y for _, y in cfg.explicit_types], dtype=np.float64)
        return xs, ys
    P: LayerTypeDistribution = cfg.layer_types
    idx = rng.choice(len(P.ps), size=cfg.layer_count, p=P.ps)
    return P.xs[idx].astype(np.int64), P.ys[idx]


def generate(cfg: ExperimentConfig, replicate_index: int = 0) -> OverlayGraph:
    """Sample one overlay graph for the given replicate.

    Layer node sets are uniform x-subsets; intra-layer edges are i.i.d.
    Bernoulli(y) over the x-choose-2 node pairs (realised by drawing the
    Binomial edge count and then that many distinct pair indices, which
    gives the same law at O(x^2 y) expected cost).
    """
    n = cfg.n
    rng_types = _stream(cfg.master_seed, replicate_index, _PURPOSE_TYPES)
    xs, ys = _resolve_types(cfg, rng_types)
    if xs.size and int(xs.max()) > n:
        raise ValueError(f"sampled layer size {int(xs.max())} exceeds n = {n}")
    m = len(xs)

    rng_nodes = _stream(cfg.master_seed, replicate_index, _PURPOSE_MEMBERSHIP)
    node_lists: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * m
    # draw memberships grouped by size, in increasing size order, so the
    # stream consumption is a deterministic function of the sampled types
    order = np.argsort(xs, kind="stable")
    pos = 0
    while pos < m:
        x = int(xs[order[pos]])
        end = pos
        while end < m and xs[order[end]] == x:
            end += 1
        group = order[pos:end]
        rows = _distinct_rows(rng_nodes, len(group), x, n)
        for row_idx, k in enumerate(group):
            node_lists[k] = rows[row_idx]
        pos = end

    rng_edges = _stream(cfg.master_seed, replicate_index, _PURPOSE_EDGES)
    edge_lists: list[np.ndarray] = [np.empty((0, 2), dtype=np.int64)] * m
    # edges grouped by (size, strength); deterministic group order
    pair_key = np.lexsort((ys, xs))
    pos = 0
    while pos < m:
        x = int(xs[pair_key[pos]])
        y = float(ys[pair_key[pos]])
        end = pos
        while end < m and xs[pair_key[end]] == x and ys[pair_key[end]] == y:
            end += 1
        group = pair_key[pos:end]
        pos = end
        pairs_total = x * (x - 1) // 2
        if pairs_total == 0 or y == 0.0:
            continue
        if y == 1.0:
            ii, jj = np.triu_indices(x, k=1)
            for k in group:
                nodes = node_lists[k]
                a, b = nodes[ii], nodes[jj]
                edge_lists[k] = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)
            continue
        if pairs_total <= 512:
            coins = rng_edges.random((len(group), pairs_total)) < y
            ii, jj = np.triu_indices(x, k=1)
            for row_idx, k in enumerate(group):
                hit = coins[row_idx]
                if not hit.any():
                    continue
                nodes = node_lists[k]
                a, b = nodes[ii[hit]], nodes[jj[hit]]
                edge_lists[k] = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)
        else:
            counts = rng_edges.binomial(pairs_total, y, size=len(group))
            for row_idx, k in enumerate(group):
                c = int(counts[row_idx])
                if c == 0:
                    continue
                picked = _distinct_ints(rng_edges, c, pairs_total)
                li, lj = _pair_decode(picked)
                nodes = node_lists[k]
                a, b = nodes[li], nodes[lj]
                edge_lists[k] = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)

    node_ptr = np.zeros(m + 1, dtype=np.int64)
    node_ptr[1:] = np.cumsum([len(v) for v in node_lists])
    edge_ptr = np.zeros(m + 1, dtype=np.int64)
    edge_ptr[1:] = np.cumsum([len(e) for e in edge_lists])
    layer_nodes = np.concatenate(node_lists) if m else np.empty(0, dtype=np.int64)
    layer_edges = (
        np.concatenate(edge_lists) if any(len(e) for e in edge_lists) else np.empty((0, 2), dtype=np.int64)
    )
    union_edges, union_mult = _dedupe(layer_edges, n)
    return OverlayGraph(
        n=n,
        node_ptr=node_ptr,
        layer_nodes=layer_nodes,
        edge_ptr=edge_ptr,
        layer_edges=layer_edges,
        layer_strengths=ys,
        union_edges=union_edges,
        union_mult=union_mult,
        seed_info={
            "generator": GENERATOR_NAME,
            "master_seed": cfg.master_seed,
            "replicate": replicate_index,
        },
    )


def _segment_counts(keep: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Kept-element count per CSR segment."""
    m = len(ptr) - 1
    rows = np.nonzero(keep)[0]
    if len(rows) == 0:
        return np.zeros(m, dtype=np.int64)
    owner = np.searchsorted(ptr, rows, side="right") - 1
    return np.bincount(owner, minlength=m).astype(np.int64)


def _filter_layers(g: OverlayGraph, edge_keep_flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """New (edge_ptr, layer_edges) keeping flagged rows of layer_edges."""
    counts = _segment_counts(edge_keep_flat, g.edge_ptr)
    edge_ptr = np.zeros(g.m + 1, dtype=np.int64)
    edge_ptr[1:] = np.cumsum(counts)
    kept = g.layer_edges[edge_keep_flat] if len(g.layer_edges) else np.empty((0, 2), dtype=np.int64)
    return edge_ptr, kept


def site_percolate(
    g: OverlayGraph, retain: float | Iterable[int], seed: int | None = None
) -> OverlayGraph:
    """Induced subgraph on a retained node set, relabelled densely.

    ``retain`` is either a retention probability (nodes kept i.i.d.) or an
    explicit iterable of node ids.  The returned graph's ``node_map``
    gives each new node's original id.  Retained layer sizes are then
    hypergeometric given the originals.
    """
    if isinstance(retain, (float, int)) and not isinstance(retain, bool):
        theta = float(retain)
        if not 0.0 <= theta <= 1.0:
            raise ValueError("retention probability outside [0, 1]")
        rng = _stream(
            seed if seed is not None else g.seed_info.get("master_seed", 0),
            g.seed_info.get("replicate", 0),
            _PURPOSE_SITE,
        )
        keep = rng.random(g.n) < theta
    else:
        keep = np.zeros(g.n, dtype=bool)
        idx = np.asarray(list(retain), dtype=np.int64)
        if len(idx) and (idx.min() < 0 or idx.max() >= g.n):
            raise ValueError("explicit node set outside the graph's node range")
        keep[idx] = True
    new_id = np.cumsum(keep, dtype=np.int64) - 1
    n_new = int(keep.sum())

    node_keep = keep[g.layer_nodes]
    counts = _segment_counts(node_keep, g.node_ptr)
    node_ptr = np.zeros(g.m + 1, dtype=np.int64)
    node_ptr[1:] = np.cumsum(counts)
    layer_nodes = new_id[g.layer_nodes[node_keep]]

    if len(g.layer_edges):
        ek = keep[g.layer_edges[:, 0]] & keep[g.layer_edges[:, 1]]
    else:
        ek = np.empty(0, dtype=bool)
    edge_ptr, kept_edges = _filter_layers(g, ek)
    layer_edges = new_id[kept_edges] if len(kept_edges) else np.empty((0, 2), dtype=np.int64)
    union_edges, union_mult = _dedupe(layer_edges, max(n_new, 1))
    return OverlayGraph(
        n=n_new,
        node_ptr=node_ptr,
        layer_nodes=layer_nodes,
        edge_ptr=edge_ptr,
        layer_edges=layer_edges,
        layer_strengths=g.layer_strengths,
        union_edges=union_edges,
        union_mult=union_mult,
        seed_info={**g.seed_info, "site_percolated": True},
        node_map=np.nonzero(keep)[0],
    )


def _edge_codes(edges: np.ndarray, n: int) -> np.ndarray:
    return edges[:, 0].astype(np.int64) * n + edges[:, 1].astype(np.int64)


def _rebuild_from_union_survivors(g: OverlayGraph, survive: np.ndarray, tag: str) -> OverlayGraph:
    """Overlay graph keeping exactly the flagged union edges (all layer copies)."""
    alive = _edge_codes(g.union_edges[survive], g.n)
    if len(g.layer_edges):
        ek = np.isin(_edge_codes(g.layer_edges, g.n), alive)
    else:
        ek = np.empty(0, dtype=bool)
    edge_ptr, kept = _filter_layers(g, ek)
    return OverlayGraph(
        n=g.n,
        node_ptr=g.node_ptr,
        layer_nodes=g.layer_nodes,
        edge_ptr=edge_ptr,
        layer_edges=kept,
        layer_strengths=g.layer_strengths,
        union_edges=g.union_edges[survive],
        union_mult=g.union_mult[survive],
        seed_info={**g.seed_info, tag: True},
        node_map=g.node_map,
    )


def bond_percolate_overlay(g: OverlayGraph, theta: float, seed: int | None = None) -> OverlayGraph:
    """Keep each union edge independently with probability theta (one coin per edge)."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta outside [0, 1]")
    rng = _stream(
        seed if seed is not None else g.seed_info.get("master_seed", 0),
        g.seed_info.get("replicate", 0),
        _PURPOSE_BOND,
    )
    survive = rng.random(len(g.union_edges)) < theta
    return _rebuild_from_union_survivors(g, survive, "bond_overlay")


def bond_percolate_layerwise(g: OverlayGraph, theta: float, seed: int | None = None) -> OverlayGraph:
    """Independent coin per (layer, edge) pair; the union is recomputed.

    Distributionally this is the overlay model with strengths theta * y.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta outside [0, 1]")
    rng = _stream(
        seed if seed is not None else g.seed_info.get("master_seed", 0),
        g.seed_info.get("replicate", 0),
        _PURPOSE_BOND,
    )
    ek = rng.random(len(g.layer_edges)) < theta
    edge_ptr, kept = _filter_layers(g, ek)
    union_edges, union_mult = _dedupe(kept, g.n)
    return OverlayGraph(
        n=g.n,
        node_ptr=g.node_ptr,
        layer_nodes=g.layer_nodes,
        edge_ptr=edge_ptr,
        layer_edges=kept,
        layer_strengths=g.layer_strengths * theta,
        union_edges=union_edges,
        union_mult=union_mult,
        seed_info={**g.seed_info, "bond_layerwise": True},
        node_map=g.node_map,
    )


def coupled_bond_pair(
    g: OverlayGraph, theta: float, seed: int | None = None
) -> tuple[OverlayGraph, OverlayGraph]:
    """Couple overlay- and layerwise-bond percolation on the same instance.

    Per union edge with multiplicity M: the layerwise graph keeps it with
    probability 1 - (1-theta)^M and the overlay graph keeps it with
    conditional probability theta / (1 - (1-theta)^M) on top, so edge-wise
    overlay subset layerwise subset original holds surely while each
    marginal matches its own percolation law on the union edge set.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta outside [0, 1]")
    rng = _stream(
        seed if seed is not None else g.seed_info.get("master_seed", 0),
        g.seed_info.get("replicate", 0),
        _PURPOSE_BOND,
    )
    mult = g.union_mult.astype(np.float64)
    p_layer = 1.0 - (1.0 - theta) ** mult
    with np.errstate(divide="ignore", invalid="ignore"):
        p_cond = np.where(p_layer > 0.0, theta / p_layer, 0.0)
    u1 = rng.random(len(mult)) < p_layer
    u2 = rng.random(len(mult)) < p_cond
    layerwise = _rebuild_from_union_survivors(g, u1, "coupled_layerwise")
    overlay = _rebuild_from_union_survivors(g, u1 & u2, "coupled_overlay")
    return overlay, layerwise

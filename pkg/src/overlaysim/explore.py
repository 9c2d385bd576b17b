"""Component exploration procedures over overlay graphs.

Three related tools, each exposed as a testable object:

* restricted exploration: explores each layer at most once, enqueueing the
  within-layer transitive-closure neighbours of the current node.  Its
  output is always a subset of the root's component, with equality
  whenever no multi-overlap occurred; the trace records both multi-overlap
  flag types per step so that dichotomy is checkable.
* randomised extraction of pairwise-disjoint sets with i.i.d. Bernoulli
  admission indicators (used by the balanced exploration).
* balanced exploration: restricted exploration with disjoint-set
  extraction and per-type layer down-sampling, which keeps the unexplored
  layer pool balanced.

Plus the queue process of a Galton-Watson tree: `gw_queue_tail` evaluates
the probability that the exploration queue is still alive after t steps,
exactly (dynamic programming) or by Monte Carlo.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .pmf import Pmf
from .sampling import OverlayGraph

__all__ = [
    "ExplorationTrace",
    "LayerIndex",
    "GuaranteeViolation",
    "restricted_explore",
    "extract_disjoint",
    "balanced_explore",
    "gw_queue_tail",
]


class GuaranteeViolation(ValueError):
    """Parameters violate the hypotheses backing a distributional guarantee."""


class LayerIndex:
    """node -> covering layers lookup for an overlay graph."""

    def __init__(self, g: OverlayGraph):
        owner = np.repeat(np.arange(g.m), np.diff(g.node_ptr))
        order = np.argsort(g.layer_nodes, kind="stable")
        self._sorted_nodes = g.layer_nodes[order]
        self._sorted_layers = owner[order]
        self.g = g

    def layers_of(self, v: int) -> np.ndarray:
        lo = np.searchsorted(self._sorted_nodes, v, side="left")
        hi = np.searchsorted(self._sorted_nodes, v, side="right")
        return self._sorted_layers[lo:hi]


def _layer_component_of(g: OverlayGraph, k: int, v: int) -> set[int]:
    """Nodes reachable from v inside layer k, excluding v itself."""
    edges = g.layer_edges_of(k)
    if len(edges) == 0:
        return set()
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    if v not in adj:
        return set()
    seen = {v}
    stack = [v]
    while stack:
        u = stack.pop()
        for w in adj.get(u, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    seen.discard(v)
    return seen


@dataclass
class ExplorationTrace:
    """Step-by-step record of one exploration run."""

    root: int
    visited: list[int] = field(default_factory=list)
    explored_layers: list[list[int]] = field(default_factory=list)  # per step
    type1_flags: list[bool] = field(default_factory=list)
    type2_flags: list[bool] = field(default_factory=list)
    extraction_violations: list[bool] = field(default_factory=list)  # balanced mode
    discovered: set[int] = field(default_factory=set)

    @property
    def output(self) -> set[int]:
        return set(self.visited)

    @property
    def steps(self) -> int:
        return len(self.visited)

    @property
    def flag_clean(self) -> bool:
        return not (any(self.type1_flags) or any(self.type2_flags))

    def step_records(self) -> list[dict]:
        """Serializable per-step records for debugging dumps."""
        return [
            {
                "v": v,
                "layers": self.explored_layers[i],
                "type1": self.type1_flags[i] if self.type1_flags else False,
                "type2": self.type2_flags[i] if self.type2_flags else False,
            }
            for i, v in enumerate(self.visited)
        ]


class _MinQueue:
    """Set-like queue with O(log) minimum extraction."""

    def __init__(self, first: int):
        self._heap = [first]
        self._members = {first}

    def __bool__(self):
        return bool(self._members)

    def push(self, v: int) -> None:
        if v not in self._members:
            self._members.add(v)
            heapq.heappush(self._heap, v)

    def pop_min(self) -> int:
        while True:
            v = heapq.heappop(self._heap)
            if v in self._members:
                self._members.remove(v)
                return v


def restricted_explore(g: OverlayGraph, root: int, index: LayerIndex | None = None) -> ExplorationTrace:
    """Explore the component of ``root``, visiting each layer at most once.

    At each step the smallest queued node v is explored: every not yet
    explored layer covering v contributes the within-layer transitive
    closure neighbours of v to the queue.  Because an explored layer is
    never revisited, nodes of a layer that are separated from v inside
    that layer can be missed; the two multi-overlap flags recorded per
    step identify exactly the situations in which that can happen.
    """
    if not 0 <= root < g.n:
        raise ValueError(f"root {root} outside node range")
    index = index or LayerIndex(g)
    trace = ExplorationTrace(root=root)
    queue = _MinQueue(root)
    explored_layers: set[int] = set()
    discovered = {root}
    while queue:
        v = queue.pop_min()
        trace.visited.append(v)
        fresh = [int(k) for k in index.layers_of(v) if k not in explored_layers]
        # multi-overlap flags are judged against the pre-step discovered set
        others: list[set[int]] = []
        type1 = False
        type2 = False
        for k in fresh:
            nodes = set(int(u) for u in g.layer_nodes_of(k))
            nodes.discard(v)
            if nodes & discovered:
                type1 = True
            for prev in others:
                if nodes & prev:
                    type2 = True
                    break
            others.append(nodes)
        for k, nodes in zip(fresh, others):
            explored_layers.add(k)
            discovered.update(nodes)
        # enqueue the transitive-closure neighbours; a newly explored layer
        # cannot contain an already explored node, so the queue set only
        # needs to dedupe against itself
        for k in fresh:
            for u in _layer_component_of(g, k, v):
                queue.push(u)
        trace.explored_layers.append(fresh)
        trace.type1_flags.append(type1)
        trace.type2_flags.append(type2)
    trace.discovered = discovered
    return trace


def _no_overlap_ratio(ground: int, h: int, x: int) -> float:
    """C(ground, x) / C(ground - h, x): inverse probability that an x-set avoids an h-set."""
    num = 1.0
    for r in range(x):
        denom = ground - h - r
        if denom <= 0:
            return math.inf
        num *= (ground - r) / denom
    return num


def extract_disjoint(
    sets: list[set[int]],
    ground_size: int,
    taboo: set[int],
    alpha: float,
    rng: np.random.Generator | int | None = None,
    strict: bool = True,
) -> list[int]:
    """Admit a random subcollection of the given sets, pairwise disjoint and avoiding the taboo set.

    Scans the sets in order; set k is admitted when it avoids everything
    admitted so far (plus the taboo set) and an independent uniform draw
    clears a threshold that exactly compensates the avoidance bias.  When
    the inputs are independent uniform subsets of the ground set and

        |taboo| + sum of set sizes <= ground_size,
        alpha <= (1 - (|taboo| + sum sizes) / ground_size)^(max size),

    the admission indicators are i.i.d. Bernoulli(alpha).  With
    ``strict=True`` a violation of those hypotheses raises
    GuaranteeViolation; the sure disjointness of the output holds either way.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    total = sum(len(s) for s in sets)
    max_size = max((len(s) for s in sets), default=0)
    if strict:
        if len(taboo) + total > ground_size:
            raise GuaranteeViolation("taboo plus sets exceed the ground set")
        bound = (1.0 - (len(taboo) + total) / ground_size) ** max_size
        if alpha > bound + 1e-12:
            raise GuaranteeViolation(f"alpha = {alpha} exceeds the admissible bound {bound}")
    admitted: list[int] = []
    blocked = set(taboo)
    h = len(taboo)
    draws = rng.random(len(sets))
    for k, vk in enumerate(sets):
        if len(vk) == 0:
            # empty sets always avoid everything; admit with probability alpha
            if draws[k] <= alpha:
                admitted.append(k)
            continue
        if not (vk & blocked) and draws[k] <= alpha * _no_overlap_ratio(ground_size, h, len(vk)):
            admitted.append(k)
            blocked |= vk
            h += len(vk)
    return admitted


def balanced_explore(
    g: OverlayGraph,
    root: int,
    nu: int,
    delta: float,
    index: LayerIndex | None = None,
    rng: np.random.Generator | int | None = None,
) -> ExplorationTrace:
    """Restricted exploration with disjoint extraction and layer balancing.

    Discovered layers covering the current node pass through
    :func:`extract_disjoint` with admission rate (1 - delta)(1 - (t-1)/n),
    and after each step the pool of unexplored layers is down-sampled so at
    most (initial count - nu * t) layers of each (size, strength) type stay
    available.  Output is a subset of the root's component by construction.
    Per-step extraction hypothesis violations are recorded on the trace
    rather than raised, since the run itself remains valid.
    """
    if not 0 <= root < g.n:
        raise ValueError(f"root {root} outside node range")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if nu < 0:
        raise ValueError("nu must be >= 0")
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    index = index or LayerIndex(g)
    sizes = g.layer_sizes
    # finite type space: distinct (size, strength) pairs
    available: dict[tuple[int, float], set[int]] = {}
    for k in range(g.m):
        available.setdefault((int(sizes[k]), float(g.layer_strengths[k])), set()).add(k)
    m_xy0 = {ty: len(ks) for ty, ks in available.items()}
    in_pool = np.ones(g.m, dtype=bool)

    trace = ExplorationTrace(root=root)
    queue = _MinQueue(root)
    discovered = {root}
    t = 0
    while queue:
        t += 1
        v = queue.pop_min()
        trace.visited.append(v)
        w_plus = [int(k) for k in index.layers_of(v) if in_pool[k]]
        vk_sets = []
        for k in w_plus:
            nodes = set(int(u) for u in g.layer_nodes_of(k))
            nodes.discard(v)
            vk_sets.append(nodes)
        explored_before = set(trace.visited[:-1])
        ground = g.n - (t - 1)
        # discovered has not yet absorbed this step's layers, so this is the
        # pre-step discovered set restricted to the unexplored ground set
        taboo = discovered - explored_before
        alpha_t = (1.0 - delta) * (1.0 - (t - 1) / g.n)
        total = len(taboo) + sum(len(s) for s in vk_sets)
        max_size = max((len(s) for s in vk_sets), default=0)
        violated = total > ground or (
            alpha_t > (1.0 - total / ground) ** max_size + 1e-12 if ground > 0 else True
        )
        trace.extraction_violations.append(bool(violated))
        chosen = extract_disjoint(vk_sets, ground, taboo, max(min(alpha_t, 1.0), 0.0), rng, strict=False)
        w_t = [w_plus[i] for i in chosen]
        for nodes in vk_sets:
            discovered.update(nodes)
        new_nodes: set[int] = set()
        for k in w_t:
            new_nodes |= _layer_component_of(g, k, v)
        for u in new_nodes:
            queue.push(u)
        # remove every discovered layer from the pool, then rebalance per type
        for k in w_plus:
            in_pool[k] = False
            available[(int(sizes[k]), float(g.layer_strengths[k]))].discard(k)
        for ty, pool in available.items():
            target = min(len(pool), max(m_xy0[ty] - nu * t, 0))
            if target < len(pool):
                drop = rng.choice(sorted(pool), size=len(pool) - target, replace=False)
                for k in drop:
                    pool.discard(int(k))
                    in_pool[int(k)] = False
        trace.explored_layers.append(w_t)
    trace.discovered = discovered
    return trace


def gw_queue_tail(
    f: Pmf,
    t: int,
    mode: str = "exact",
    qmax: int = 10_000,
    reps: int = 100_000,
    seed: int | None = None,
) -> float:
    """P(queue alive after t steps) for the branching exploration queue.

    The queue starts at 1 and evolves as Q <- (Q - 1 + Z) while positive,
    with i.i.d. offspring Z ~ f.  ``exact`` runs the queue-length dynamic
    program truncated at ``qmax`` (overflow mass is treated as surviving,
    a negligible upward bias when qmax is large); ``monte_carlo`` simulates
    ``reps`` paths.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 1.0
    fw = f.dense(f.max_support)
    if mode == "exact":
        kmax = len(fw) - 1
        alive = np.zeros(qmax + 1)
        alive[1] = 1.0
        dead = 0.0
        for _ in range(t):
            nxt = np.convolve(alive[1:], fw)  # queue q -> q - 1 + Z
            if len(nxt) > qmax + 1:
                nxt[qmax] += nxt[qmax + 1 :].sum()  # park overflow at qmax
                nxt = nxt[: qmax + 1]
            else:
                nxt = np.pad(nxt, (0, qmax + 1 - len(nxt)))
            dead += nxt[0]
            nxt[0] = 0.0
            alive = nxt
        # offspring tail mass never absorbs at zero; count it as alive
        return float(min(max(1.0 - dead, 0.0), 1.0))
    if mode == "monte_carlo":
        rng = np.random.default_rng(seed)
        cdf = np.cumsum(fw)
        q = np.ones(reps, dtype=np.int64)
        for _ in range(t):
            z = np.searchsorted(cdf, rng.random(reps), side="right")
            q = np.where(q > 0, q - 1 + z, 0)
        return float(np.mean(q > 0))
    raise ValueError("mode must be 'exact' or 'monte_carlo'")

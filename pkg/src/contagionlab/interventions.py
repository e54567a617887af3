"""Structural interventions: rewiring, random additions and triad-closing additions.

All three are sized as a fraction of the current edge count, rounded half up.
New edges carry the ``RANDOM`` label. Interventions are pure functions of
``(graph, fraction, rng)``; the returned graph records what was done in
``meta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InterventionError, InvalidParameterError
from .graphs import EdgeLabel, Graph, _pair_from_index

KINDS = ("none", "rewire", "add_random", "add_triad_closing")


@dataclass(frozen=True)
class InterventionSpec:
    kind: str = "none"
    fraction: float = 0.0
    sequential: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown intervention {self.kind!r}; expected one of {KINDS}")
        if self.fraction < 0:
            raise InvalidParameterError("intervention fraction must be non-negative")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def edge_budget(graph: Graph, fraction: float) -> int:
    if fraction < 0:
        raise InvalidParameterError("intervention fraction must be non-negative")
    return round_half_up(fraction * graph.m)


def common_neighbor_count(graph: Graph, u: int, v: int) -> int:
    if u == v:
        raise InvalidParameterError("common_neighbor_count needs two distinct nodes")
    return int(np.intersect1d(graph.neighbors(u), graph.neighbors(v), assume_unique=True).size)


def _non_edge_keys(graph: Graph, exclude: np.ndarray | None = None) -> np.ndarray:
    """All non-edge pair keys ``u * n + v`` (``u < v``), minus ``exclude``. Dense; small graphs only."""
    n = graph.n
    u, v = np.triu_indices(n, k=1)
    keys = u.astype(np.int64) * n + v
    taken = graph._keys if exclude is None else np.union1d(graph._keys, exclude)
    return np.setdiff1d(keys, taken, assume_unique=True)


def _uniform_non_edges(graph: Graph, count: int, rng: np.random.Generator,
                       exclude: np.ndarray | None = None) -> np.ndarray:
    """``count`` distinct uniformly chosen non-edge keys, avoiding ``exclude`` as well.

    Uses rejection sampling of random pairs while non-edges are plentiful and
    falls back to explicit enumeration otherwise.
    """
    n = graph.n
    total = n * (n - 1) // 2
    blocked = graph._keys if exclude is None else np.union1d(graph._keys, exclude)
    free = total - blocked.size
    if count > free:
        raise InterventionError(f"cannot add {count} edges: only {free} non-edges available")
    if count == 0:
        return np.empty(0, dtype=np.int64)
    if free < 4 * count or total <= 50_000:
        pool = _non_edge_keys(graph, exclude)
        return pool[rng.choice(pool.size, size=count, replace=False)]

    chosen = np.empty(0, dtype=np.int64)
    while chosen.size < count:
        need = count - chosen.size
        idx = rng.integers(total, size=int(need * total / free * 1.2) + 8)
        w, v = _pair_from_index(idx)
        keys = w * n + v
        ok = ~np.isin(keys, blocked) & ~np.isin(keys, chosen)
        keys = keys[ok]
        _, first = np.unique(keys, return_index=True)
        keys = keys[np.sort(first)]
        chosen = np.concatenate((chosen, keys[:need]))
    return chosen


def _keys_to_pairs(keys: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    return keys // n, keys % n


def rewire(graph: Graph, fraction: float, rng: np.random.Generator) -> Graph:
    """Remove ``round(fraction * m)`` random edges and add as many random non-edges.

    Removed pairs are not eligible for re-addition. Degrees are not preserved.
    """
    k = edge_budget(graph, fraction)
    if k > graph.m:
        raise InterventionError(f"cannot rewire {k} of {graph.m} edges")
    removed = rng.choice(graph.m, size=k, replace=False) if k else np.empty(0, dtype=np.int64)
    keys = _uniform_non_edges(graph, k, rng)
    u, v = _keys_to_pairs(keys, graph.n)
    meta = dict(graph.meta, intervention="rewire", changed=k)
    return graph.without_edges(removed).with_edges(u, v, EdgeLabel.RANDOM, meta=meta)


def add_random(graph: Graph, fraction: float, rng: np.random.Generator) -> Graph:
    """Add ``round(fraction * m)`` uniformly chosen non-edges."""
    k = edge_budget(graph, fraction)
    keys = _uniform_non_edges(graph, k, rng)
    u, v = _keys_to_pairs(keys, graph.n)
    meta = dict(graph.meta, intervention="add_random", changed=k)
    return graph.with_edges(u, v, EdgeLabel.RANDOM, meta=meta)


def triad_candidates(graph: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Non-edges with at least one common neighbor, as ``(keys, common_neighbor_counts)``.

    Cached on the graph, which is immutable.
    """
    cached = graph._cache.get("triad_candidates")
    if cached is not None:
        return cached
    a = graph.adjacency_matrix()
    two_paths = (a @ a).tocoo()
    r, c, w = two_paths.row, two_paths.col, two_paths.data
    upper = r < c
    r, c, w = r[upper].astype(np.int64), c[upper].astype(np.int64), w[upper].astype(np.int64)
    keys = r * graph.n + c
    open_ = ~graph.has_edges(r, c) & (w > 0)
    keys, w = keys[open_], w[open_]
    order = np.argsort(keys)
    out = (keys[order], w[order])
    graph._cache["triad_candidates"] = out
    return out


def _weighted_sample(weights: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn without replacement with probability proportional to ``weights``.

    Exponential-key method (Efraimidis-Spirakis): the ``size`` smallest values
    of ``Exp(1) / w`` form a successive weighted sample.
    """
    keys = rng.exponential(size=weights.size) / weights
    if size >= weights.size:
        return np.argsort(keys, kind="stable")
    part = np.argpartition(keys, size - 1)[:size]
    return part[np.argsort(keys[part], kind="stable")]


def add_triad_closing(graph: Graph, fraction: float, rng: np.random.Generator,
                      sequential: bool = False) -> Graph:
    """Add ``round(fraction * m)`` non-edges chosen proportionally to the triads they close.

    Weights are common-neighbor counts in the original graph (batch mode) or
    recomputed after each addition (``sequential=True``). If positive-weight
    candidates run out, the rest are filled with uniform non-edges; their
    number is recorded as ``meta["fallback"]``.
    """
    k = edge_budget(graph, fraction)
    n = graph.n
    if sequential:
        picked = _sequential_triad_keys(graph, k, rng)
    else:
        keys, w = triad_candidates(graph)
        take = min(k, keys.size)
        picked = keys[_weighted_sample(w.astype(np.float64), take, rng)] if take else keys[:0]
    fallback = k - picked.size
    if fallback:
        extra = _uniform_non_edges(graph, fallback, rng, exclude=picked)
        picked = np.concatenate((picked, extra))
    u, v = _keys_to_pairs(picked, n)
    meta = dict(graph.meta, intervention="add_triad_closing", changed=k, fallback=int(fallback))
    return graph.with_edges(u, v, EdgeLabel.RANDOM, meta=meta)


def _sequential_triad_keys(graph: Graph, k: int, rng: np.random.Generator) -> np.ndarray:
    n = graph.n
    keys, w = triad_candidates(graph)
    weight = dict(zip(keys.tolist(), w.tolist()))
    adj = [set(graph.neighbors(i).tolist()) for i in range(n)]
    out = []
    for _ in range(k):
        if not weight:
            break
        ks = np.fromiter(weight.keys(), dtype=np.int64, count=len(weight))
        ws = np.fromiter(weight.values(), dtype=np.float64, count=len(weight))
        cdf = np.cumsum(ws)
        key = int(ks[np.searchsorted(cdf, rng.random() * cdf[-1], side="right")])
        out.append(key)
        del weight[key]
        a, b = divmod(key, n)
        # the new edge a-b opens a path a-b-x for every x adjacent to b, and x-a-b likewise
        for src, dst in ((a, b), (b, a)):
            for x in adj[dst]:
                if x == src or x in adj[src]:
                    continue
                pk = min(src, x) * n + max(src, x)
                weight[pk] = weight.get(pk, 0) + 1
        adj[a].add(b)
        adj[b].add(a)
    return np.array(out, dtype=np.int64)


def apply_intervention(graph: Graph, spec: InterventionSpec, rng: np.random.Generator) -> Graph:
    if spec.kind == "none":
        return graph
    if spec.kind == "rewire":
        return rewire(graph, spec.fraction, rng)
    if spec.kind == "add_random":
        return add_random(graph, spec.fraction, rng)
    return add_triad_closing(graph, spec.fraction, rng, sequential=spec.sequential)

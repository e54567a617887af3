"""Labeled undirected simple graphs and the generators used in the experiments.

Graphs are immutable: edge arrays are stored read-only in canonical order
(``u < v``, sorted by ``u * n + v``) together with a CSR adjacency whose
neighbor lists are sorted. Every edge carries one :class:`EdgeLabel`, which
the dynamics use to restrict sub-threshold adoptions to cycle edges.
"""

from __future__ import annotations

import logging
import math
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import EdgeListError, InvalidParameterError

logger = logging.getLogger(__name__)


class EdgeLabel(IntEnum):
    """Edge provenance. Lower values win when a pair is labeled twice."""

    CYCLE1 = 0
    CYCLE_EXTRA = 1
    RANDOM = 2
    EMPIRICAL = 3

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, token: str) -> "EdgeLabel":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown edge label {token!r}") from None


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Graph:
    """Immutable labeled undirected simple graph on nodes ``0..n-1``.

    Parameters
    ----------
    n : int
        Number of nodes.
    u, v : array_like of int
        Edge endpoints. Order within a pair is irrelevant.
    labels : array_like of int or EdgeLabel, optional
        One label per edge; defaults to ``EdgeLabel.EMPIRICAL``.
    meta : mapping, optional
        Free-form provenance (generator name, intervention counts, ...).

    Duplicate pairs are collapsed, keeping the smallest label value so that
    cycle labels take precedence over random ones. Self-loops are rejected.
    """

    __slots__ = ("n", "edges", "labels", "meta", "_keys", "indptr", "indices",
                 "adj_labels", "degree", "_cache")

    def __init__(self, n: int, u=(), v=(), labels=None, meta: Mapping | None = None):
        n = int(n)
        if n < 0:
            raise InvalidParameterError("n must be non-negative")
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        if u.shape != v.shape:
            raise InvalidParameterError("u and v must have the same length")
        if labels is None:
            labels = np.full(u.shape, EdgeLabel.EMPIRICAL, dtype=np.uint8)
        else:
            labels = np.asarray(labels, dtype=np.uint8).ravel()
            if labels.shape != u.shape:
                raise InvalidParameterError("one label per edge required")
        if u.size:
            if u.min() < 0 or v.min() < 0 or u.max() >= n or v.max() >= n:
                raise InvalidParameterError("edge endpoint outside [0, n)")
            if np.any(u == v):
                raise InvalidParameterError("self-loops are not allowed")
        a = np.minimum(u, v)
        b = np.maximum(u, v)
        keys = a * n + b
        order = np.lexsort((labels, keys))
        keys = keys[order]
        labels = labels[order]
        first = np.ones(keys.shape, dtype=bool)
        first[1:] = keys[1:] != keys[:-1]
        keys = keys[first]
        labels = labels[first]

        self.n = n
        self._keys = _readonly(keys)
        self.edges = _readonly(np.column_stack((keys // n, keys % n)) if n else
                               np.empty((0, 2), dtype=np.int64))
        self.labels = _readonly(labels)
        self.meta = dict(meta or {})
        self._cache = {}

        src = np.concatenate((self.edges[:, 0], self.edges[:, 1]))
        dst = np.concatenate((self.edges[:, 1], self.edges[:, 0]))
        lab = np.concatenate((labels, labels))
        order = np.argsort(src * max(n, 1) + dst, kind="stable")
        self.indices = _readonly(dst[order])
        self.adj_labels = _readonly(lab[order])
        deg = np.bincount(src, minlength=n).astype(np.int64)
        self.degree = _readonly(deg)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        self.indptr = _readonly(indptr)

    # -- basic queries -----------------------------------------------------

    @property
    def m(self) -> int:
        return int(self._keys.size)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self._keys, other._keys)
                and np.array_equal(self.labels, other.labels))

    def __hash__(self):
        return hash((self.n, self._keys.tobytes(), self.labels.tobytes()))

    def __getstate__(self):
        return {"n": self.n, "edges": np.asarray(self.edges), "labels": np.asarray(self.labels),
                "meta": self.meta}

    def __setstate__(self, state):
        e = state["edges"]
        self.__init__(state["n"], e[:, 0], e[:, 1], state["labels"], state["meta"])

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        a, b = (u, v) if u < v else (v, u)
        key = a * self.n + b
        i = np.searchsorted(self._keys, key)
        return bool(i < self._keys.size and self._keys[i] == key)

    def has_edges(self, u, v) -> np.ndarray:
        """Vectorized :meth:`has_edge`."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        keys = np.minimum(u, v) * self.n + np.maximum(u, v)
        i = np.searchsorted(self._keys, keys)
        i = np.minimum(i, max(self._keys.size - 1, 0))
        if self._keys.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        return (self._keys[i] == keys) & (u != v)

    def edge_label(self, u: int, v: int) -> EdgeLabel | None:
        a, b = (u, v) if u < v else (v, u)
        key = a * self.n + b
        i = np.searchsorted(self._keys, key)
        if i < self._keys.size and self._keys[i] == key:
            return EdgeLabel(int(self.labels[i]))
        return None

    def label_count(self, label: EdgeLabel) -> int:
        return int(np.count_nonzero(self.labels == label))

    def adjacency_matrix(self) -> csr_matrix:
        data = np.ones(self.indices.size, dtype=np.int64)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    # -- derived graphs ----------------------------------------------------

    def with_edges(self, u, v, label: EdgeLabel, meta: Mapping | None = None) -> "Graph":
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        return Graph(self.n,
                     np.concatenate((self.edges[:, 0], u)),
                     np.concatenate((self.edges[:, 1], v)),
                     np.concatenate((self.labels, np.full(u.shape, label, dtype=np.uint8))),
                     meta=meta if meta is not None else self.meta)

    def without_edges(self, index, meta: Mapping | None = None) -> "Graph":
        """Drop the edges at positions ``index`` of :attr:`edges`."""
        keep = np.ones(self.m, dtype=bool)
        keep[np.asarray(index, dtype=np.int64)] = False
        return Graph(self.n, self.edges[keep, 0], self.edges[keep, 1], self.labels[keep],
                     meta=meta if meta is not None else self.meta)


# -- generators --------------------------------------------------------------

def empty_graph(n: int) -> Graph:
    return Graph(n, meta={"model": "empty", "n": n})


def complete_graph(n: int, label: EdgeLabel = EdgeLabel.EMPIRICAL) -> Graph:
    u, v = np.triu_indices(n, k=1)
    return Graph(n, u, v, np.full(u.shape, label), meta={"model": "complete", "n": n})


def star_graph(n: int, label: EdgeLabel = EdgeLabel.EMPIRICAL) -> Graph:
    """Star on ``n`` nodes with center 0 (``n - 1`` leaves)."""
    leaves = np.arange(1, n)
    return Graph(n, np.zeros_like(leaves), leaves, np.full(leaves.shape, label),
                 meta={"model": "star", "n": n})


def path_graph(n: int, label: EdgeLabel = EdgeLabel.EMPIRICAL) -> Graph:
    a = np.arange(n - 1)
    return Graph(n, a, a + 1, np.full(a.shape, label), meta={"model": "path", "n": n})


def cycle_power(n: int, k: int) -> Graph:
    """Cycle-power graph: each node on an ``n``-cycle joined to all nodes within ``k`` hops.

    Hop-1 edges get ``CYCLE1``, hops ``2..k`` get ``CYCLE_EXTRA``. Every node
    has degree ``2k``.
    """
    if k < 1:
        raise InvalidParameterError("cycle power k must be >= 1")
    if n <= 2 * k:
        raise InvalidParameterError(f"cycle_power requires n > 2k (got n={n}, k={k})")
    nodes = np.arange(n, dtype=np.int64)
    us, vs, ls = [], [], []
    for hop in range(1, k + 1):
        us.append(nodes)
        vs.append((nodes + hop) % n)
        ls.append(np.full(n, EdgeLabel.CYCLE1 if hop == 1 else EdgeLabel.CYCLE_EXTRA,
                          dtype=np.uint8))
    return Graph(n, np.concatenate(us), np.concatenate(vs), np.concatenate(ls),
                 meta={"model": "cycle_power", "n": n, "k": k})


def _pair_from_index(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices of the strict lower triangle to pairs ``(w, v)``, ``w < v``.

    Pairs are enumerated ``(0,1), (0,2), (1,2), (0,3), ...`` so that index
    ``v(v-1)/2 + w`` maps to ``(w, v)``.
    """
    idx = np.asarray(idx, dtype=np.int64)
    v = np.floor((1.0 + np.sqrt(1.0 + 8.0 * idx.astype(np.float64))) / 2.0).astype(np.int64)
    w = idx - v * (v - 1) // 2
    # float rounding can be off by one near perfect squares
    low = w < 0
    v[low] -= 1
    high = w >= v
    v[high] += 1
    w = idx - v * (v - 1) // 2
    return w, v


def _sample_pair_indices(total: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Indices in ``[0, total)`` each kept independently with probability ``p``.

    Geometric skipping: gaps between successive kept indices are i.i.d.
    Geometric(p), so the cost is proportional to the number kept.
    """
    if p <= 0.0 or total == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)
    out = []
    pos = -1
    while True:
        remaining = total - 1 - pos
        expect = remaining * p
        batch = int(expect + 6.0 * math.sqrt(expect + 1.0)) + 16
        # any gap >= total lands outside; clamping keeps cumsum from overflowing
        gaps = np.minimum(rng.geometric(p, size=batch), total)
        idx = pos + np.cumsum(gaps, dtype=np.int64)
        inside = idx < total
        if not inside.all():
            out.append(idx[inside])
            break
        out.append(idx)
        pos = int(idx[-1])
    return np.concatenate(out)


def erdos_renyi(n: int, p: float, rng: np.random.Generator,
                label: EdgeLabel = EdgeLabel.RANDOM) -> Graph:
    """G(n, p): each unordered pair present independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError(f"edge probability must lie in [0, 1], got {p}")
    idx = _sample_pair_indices(n * (n - 1) // 2, p, rng)
    w, v = _pair_from_index(idx)
    return Graph(n, w, v, np.full(w.shape, label, dtype=np.uint8),
                 meta={"model": "erdos_renyi", "n": n, "p": p})


def union(a: Graph, b: Graph) -> Graph:
    """Edge union of two graphs on the same node set; cycle labels win collisions."""
    if a.n != b.n:
        raise InvalidParameterError(f"union of graphs with different sizes ({a.n} vs {b.n})")
    meta = {"model": "union", "parts": [a.meta.get("model"), b.meta.get("model")]}
    return Graph(a.n,
                 np.concatenate((a.edges[:, 0], b.edges[:, 0])),
                 np.concatenate((a.edges[:, 1], b.edges[:, 1])),
                 np.concatenate((a.labels, b.labels)), meta=meta)


def cycle_union_random(n: int, k: int, rng: np.random.Generator, *, p: float | None = None,
                       c: float | None = None, D: float | None = None) -> Graph:
    """``C_k`` union ``G(n, p)``; ``p`` may be given directly, as ``c/n``, or as ``(D - 2k)/n``."""
    given = [x is not None for x in (p, c, D)]
    if sum(given) != 1:
        raise InvalidParameterError("give exactly one of p, c, D")
    if c is not None:
        p = c / n
    elif D is not None:
        if D < 2 * k:
            raise InvalidParameterError(f"target degree D={D} below cycle degree 2k={2 * k}")
        p = (D - 2 * k) / n
    g = union(cycle_power(n, k), erdos_renyi(n, p, rng))
    g.meta.update({"model": "cycle_union_random", "n": n, "k": k, "p": p})
    return g


def eta_rewired_c2(n: int, eta: float, rng: np.random.Generator,
                   eta_max: float | None = None) -> Graph:
    """``C_2`` with hop-2 edges thinned and random long ties added at rewiring level ``eta``.

    Each ``CYCLE_EXTRA`` edge is removed with probability ``1 - exp(-eta/(2n))``
    and each unordered pair is added (label ``RANDOM``) with probability
    ``1 - exp(-eta/n**2)``. ``CYCLE1`` edges are always kept.

    With ``eta_max`` set, the draw is coupled across ``eta``: for a fixed rng
    state, removals and additions at a smaller ``eta`` are subsets of those
    at a larger one (``eta <= eta_max``).
    """
    if eta < 0:
        raise InvalidParameterError("eta must be non-negative")
    base = cycle_power(n, 2)
    extra = np.flatnonzero(base.labels == EdgeLabel.CYCLE_EXTRA)
    n2 = float(n) * n
    if eta_max is None:
        p_remove = -math.expm1(-eta / (2.0 * n))
        removed = extra[rng.random(extra.size) < p_remove]
        ties = erdos_renyi(n, -math.expm1(-eta / n2), rng)
    else:
        if eta > eta_max:
            raise InvalidParameterError("eta must not exceed eta_max")
        clocks = rng.exponential(2.0 * n, size=extra.size)
        removed = extra[clocks < eta]
        p_max = -math.expm1(-eta_max / n2)
        idx = _sample_pair_indices(n * (n - 1) // 2, p_max, rng)
        # arrival times conditioned on falling below eta_max
        arrival = -n2 * np.log1p(-rng.random(idx.size) * p_max)
        w, v = _pair_from_index(idx[arrival < eta])
        ties = Graph(n, w, v, np.full(w.shape, EdgeLabel.RANDOM, dtype=np.uint8))
    g = union(base.without_edges(removed), ties)
    g.meta.update({"model": "eta_rewired_c2", "n": n, "eta": eta,
                   "removed": int(removed.size), "added": ties.m})
    return g


def watts_strogatz(n: int, k: int, p: float, rng: np.random.Generator) -> Graph:
    """Watts-Strogatz small world: rewire each edge of ``C_k`` with probability ``p``.

    Edges ``(u, u + j)`` are visited hop by hop; a rewired edge keeps ``u`` and
    gets a uniformly chosen new endpoint that is neither ``u`` nor a current
    neighbor of ``u``. Rewired edges are labeled ``RANDOM``.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidParameterError("rewiring probability must lie in [0, 1]")
    base = cycle_power(n, k)
    adj = [set(base.neighbors(i).tolist()) for i in range(n)]
    labels = {}
    for (a, b), lab in zip(base.edges.tolist(), base.labels.tolist()):
        labels[(a, b)] = lab
    for hop in range(1, k + 1):
        coins = rng.random(n)
        for u in range(n):
            if coins[u] >= p:
                continue
            v = (u + hop) % n
            if v not in adj[u] or len(adj[u]) >= n - 1:
                continue
            while True:
                w = int(rng.integers(n))
                if w != u and w not in adj[u]:
                    break
            adj[u].discard(v)
            adj[v].discard(u)
            labels.pop((min(u, v), max(u, v)))
            adj[u].add(w)
            adj[w].add(u)
            labels[(min(u, w), max(u, w))] = EdgeLabel.RANDOM
    pairs = np.array(list(labels.keys()), dtype=np.int64).reshape(-1, 2)
    return Graph(n, pairs[:, 0], pairs[:, 1], np.fromiter(labels.values(), dtype=np.uint8),
                 meta={"model": "watts_strogatz", "n": n, "k": k, "p": p})


# -- statistics --------------------------------------------------------------

def local_clustering(g: Graph) -> np.ndarray:
    """Closed-triple fraction per node; nodes of degree < 2 get 0."""
    a = g.adjacency_matrix()
    triangles = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0
    d = g.degree.astype(np.float64)
    pairs = d * (d - 1) / 2.0
    out = np.zeros(g.n)
    ok = pairs > 0
    out[ok] = triangles[ok] / pairs[ok]
    return out


def graph_stats(g: Graph) -> dict:
    if g.n:
        _, comp = connected_components(g.adjacency_matrix(), directed=False)
        sizes = sorted(np.bincount(comp).tolist(), reverse=True)
    else:
        sizes = []
    return {
        "n": g.n,
        "m": g.m,
        "mean_degree": 2.0 * g.m / g.n if g.n else 0.0,
        "clustering_coefficient": float(local_clustering(g).mean()) if g.n else 0.0,
        "component_sizes": sizes,
    }


# -- edge-list I/O -------------------------------------------------------------

def _sort_key(tok: str):
    return (0, int(tok), "") if _is_int(tok) else (1, 0, tok)


def _is_int(tok: str) -> bool:
    try:
        int(tok)
    except ValueError:
        return False
    return True


def load_edge_list(path) -> Graph:
    """Read a whitespace-separated edge list.

    Lines starting with ``#`` are comments; a ``# nodes: N`` comment fixes the
    node count when all tokens are integers in ``[0, N)``. An optional third
    column holds an edge label (as written by :func:`write_edge_list`);
    otherwise edges are labeled ``EMPIRICAL``. Nodes are re-indexed densely:
    integer tokens in numeric order, other tokens in order of first
    appearance. Self-loops are dropped and counted in ``meta``.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise EdgeListError(f"cannot read edge list: {exc}", path=path) from exc

    declared_n = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("nodes:"):
                try:
                    declared_n = int(body.split(":", 1)[1])
                except ValueError:
                    raise EdgeListError("bad '# nodes:' header", path, lineno) from None
            continue
        toks = line.split()
        if len(toks) not in (2, 3):
            raise EdgeListError(f"expected 2 or 3 tokens, got {len(toks)}", path, lineno)
        label = EdgeLabel.EMPIRICAL
        if len(toks) == 3:
            try:
                label = EdgeLabel.parse(toks[2])
            except ValueError as exc:
                raise EdgeListError(str(exc), path, lineno) from None
        rows.append((toks[0], toks[1], label))

    tokens = [t for r in rows for t in r[:2]]
    all_int = all(_is_int(t) for t in tokens)
    if all_int and declared_n is not None:
        ints = [int(t) for t in tokens]
        if ints and (min(ints) < 0 or max(ints) >= declared_n):
            raise EdgeListError("node id outside declared '# nodes:' range", path)
        index = None
        n = declared_n
    else:
        if all_int:
            names = sorted(set(tokens), key=_sort_key)
        else:
            names = list(dict.fromkeys(tokens))
        index = {name: i for i, name in enumerate(names)}
        n = len(names)

    def node(tok):
        return int(tok) if index is None else index[tok]

    u = np.fromiter((node(r[0]) for r in rows), dtype=np.int64, count=len(rows))
    v = np.fromiter((node(r[1]) for r in rows), dtype=np.int64, count=len(rows))
    lab = np.fromiter((r[2] for r in rows), dtype=np.uint8, count=len(rows))
    loops = u == v
    dropped = int(loops.sum())
    if dropped:
        logger.warning("%s: dropped %d self-loop(s)", path, dropped)
    g = Graph(n, u[~loops], v[~loops], lab[~loops],
              meta={"model": "file", "path": str(path), "self_loops_dropped": dropped})
    return g


def write_edge_list(g: Graph, path, header: Iterable[str] = ()) -> None:
    """Write ``u v label`` lines preceded by ``#`` comments including ``# nodes: n``."""
    lines = [f"# {h}" for h in header]
    lines.append(f"# nodes: {g.n}")
    for (a, b), lab in zip(g.edges.tolist(), g.labels.tolist()):
        lines.append(f"{a} {b} {EdgeLabel(lab).token}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

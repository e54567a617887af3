"""Exact results for small graphs.

* :func:`deterministic_closure` iterates the deterministic threshold rule to
  its fixpoint (bootstrap percolation).
* :func:`exact_expected_time` treats infected subsets as states of an
  absorbing Markov chain. Given the current set, nodes adopt independently,
  so transitions factor over nodes; the chain only moves to supersets, so
  expected hitting times follow by backward substitution from large sets to
  small ones with the self-loop solved in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .activation import (ActivationSpec, FractionalThreshold, Logit, NoisyThreshold, Probit,
                         Simple, make_activation)
from .dynamics import DynamicsConfig, CYCLE1_ONLY
from .errors import InvalidParameterError, OracleSizeError
from .graphs import (EdgeLabel, Graph, complete_graph, cycle_power, erdos_renyi, load_edge_list,
                     path_graph, star_graph, union, write_edge_list)

MAX_CLOSURE_N = 20
MAX_EXPECTED_N = 12


def _mask(nodes: Iterable[int]) -> int:
    return reduce(lambda acc, i: acc | (1 << int(i)), nodes, 0)


def _members(mask: int, n: int) -> list[int]:
    return [i for i in range(n) if mask >> i & 1]


def _neighbor_masks(graph: Graph, labels=None) -> list[int]:
    out = []
    for i in range(graph.n):
        lo, hi = graph.indptr[i], graph.indptr[i + 1]
        nb = graph.indices[lo:hi]
        if labels is not None:
            nb = nb[np.isin(graph.adj_labels[lo:hi], list(labels))]
        out.append(_mask(nb.tolist()))
    return out


def closure_trajectory(graph: Graph, seeds: Sequence[int], theta: int) -> list[int]:
    """Infected bitmask after each round of the deterministic ``theta`` rule, ending at the fixpoint."""
    n = graph.n
    if n > MAX_CLOSURE_N:
        raise OracleSizeError(f"closure oracle limited to n <= {MAX_CLOSURE_N}, got {n}")
    nbr = _neighbor_masks(graph)
    cur = _mask(seeds)
    traj = [cur]
    while True:
        new = 0
        for v in range(n):
            if not cur >> v & 1 and (nbr[v] & cur).bit_count() >= theta:
                new |= 1 << v
        if not new:
            return traj
        cur |= new
        traj.append(cur)


def deterministic_closure(graph: Graph, seeds: Sequence[int], theta: int) -> tuple[frozenset, int]:
    """Final infected set and number of rounds with at least one new adoption."""
    traj = closure_trajectory(graph, seeds, theta)
    return frozenset(_members(traj[-1], graph.n)), len(traj) - 1


def edge_monotonicity_check(graph: Graph, extra_edge: tuple[int, int], seeds: Sequence[int],
                            theta: int) -> bool:
    """True iff adding ``extra_edge`` never delays any node's infection round.

    Compares the deterministic closure trajectories round by round: the set
    infected by round ``t`` with the edge must contain the set without it,
    for every ``t`` (including the final sets). In particular, when both
    graphs reach everyone, the extra edge cannot increase the round count.
    """
    u, v = extra_edge
    if graph.has_edge(u, v) or u == v:
        raise InvalidParameterError(f"{extra_edge} is already an edge or a self-loop")
    base = closure_trajectory(graph, seeds, theta)
    more = closure_trajectory(graph.with_edges([u], [v], EdgeLabel.RANDOM), seeds, theta)
    for t in range(max(len(base), len(more))):
        a = base[min(t, len(base) - 1)]
        b = more[min(t, len(more) - 1)]
        if a & ~b:
            return False
    return True


@dataclass(frozen=True)
class ExpectedTime:
    value: float
    reachable: bool
    closure: frozenset

    def as_json(self):
        return self.value if self.reachable else "unreachable"


def _node_probabilities(spec, cur, nbr, nbr_allowed, degree, sus_nodes):
    x = np.array([(nbr[v] & cur).bit_count() for v in sus_nodes])
    if nbr_allowed is None:
        xa = x
    else:
        xa = np.array([(nbr_allowed[v] & cur).bit_count() for v in sus_nodes])
    return spec.probability(x, xa, degree[sus_nodes])


def exact_expected_time(graph: Graph, seeds: Sequence[int], spec: ActivationSpec,
                        config: DynamicsConfig | None = None) -> ExpectedTime:
    """Expected number of rounds until the infected count reaches ``config.stop_fraction * n``.

    Only ``gamma = 0`` is supported. When the target count lies beyond every
    state reachable with positive probability, ``reachable`` is False and
    ``value`` is ``inf``.
    """
    config = config or DynamicsConfig()
    n = graph.n
    if n > MAX_EXPECTED_N:
        raise OracleSizeError(f"expected-time oracle limited to n <= {MAX_EXPECTED_N}, got {n}")
    if config.gamma != 0:
        raise InvalidParameterError("expected-time oracle requires gamma = 0")
    labels = config.sub_threshold_labels
    restricted = labels is not None and not set(EdgeLabel) <= labels
    nbr = _neighbor_masks(graph)
    nbr_allowed = _neighbor_masks(graph, labels) if restricted else None
    degree = np.asarray(graph.degree)
    target = config.target_count(n)
    start = _mask(seeds)
    full = (1 << n) - 1

    # positive-probability closure: the largest set the process can ever reach
    reach = start
    while True:
        sus = _members(full & ~reach, n)
        if not sus:
            break
        p = _node_probabilities(spec, reach, nbr, nbr_allowed, degree, sus)
        grow = _mask(v for v, pv in zip(sus, p) if pv > 0)
        if not grow:
            break
        reach |= grow
    closure = frozenset(_members(reach, n))
    if reach.bit_count() < target:
        return ExpectedTime(math.inf, False, closure)

    memo: dict[int, float] = {}

    def expected(cur: int) -> float:
        if cur.bit_count() >= target:
            return 0.0
        if cur in memo:
            return memo[cur]
        sus = _members(full & ~cur, n)
        p = _node_probabilities(spec, cur, nbr, nbr_allowed, degree, sus)
        pos = [(v, pv) for v, pv in zip(sus, p) if pv > 0]
        sure = _mask(v for v, pv in pos if pv >= 1)
        free = [(v, pv) for v, pv in pos if pv < 1]
        k = len(free)
        # enumerate adoption patterns of the uncertain nodes
        bits = (np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1
        pv = np.array([q for _, q in free])
        probs = np.prod(np.where(bits == 1, pv, 1.0 - pv), axis=1) if k else np.ones(1)
        node_bits = np.array([1 << v for v, _ in free], dtype=np.int64)
        nxt = cur | sure | (bits @ node_bits if k else np.zeros(1, dtype=np.int64))
        stay = 0.0
        acc = 1.0
        for s, pr in zip(nxt.tolist(), probs.tolist()):
            if s == cur:
                stay += pr
            elif pr > 0:
                acc += pr * expected(s)
        val = acc / (1.0 - stay)
        memo[cur] = val
        return val

    return ExpectedTime(expected(start), True, closure)


# -- oracle corpus -------------------------------------------------------------------

def _spec_to_dict(spec: ActivationSpec) -> dict:
    d = {"kind": spec.kind}
    d.update({k: getattr(spec, k) for k in spec.__dataclass_fields__})
    return d


def spec_from_dict(d: dict) -> ActivationSpec:
    d = dict(d)
    return make_activation(d.pop("kind"), **d)


def corpus_cases(seed: int = 20240601) -> list[dict]:
    """Small-instance corpus: cycles, cycle powers, stars, complete graphs and ER draws.

    Each case pairs a graph and adjacent seeds with one stochastic activation
    spec; activation variants are rotated so every variant appears many
    times. The deterministic threshold rule is checked on all graphs
    separately.
    """
    rng = np.random.default_rng(seed)
    graphs: list[tuple[str, Graph]] = []
    for n in (4, 5, 6, 7, 8, 9, 10):
        graphs.append((f"cycle{n}", cycle_power(n, 1)))
    for n, k in ((5, 2), (6, 2), (7, 2), (8, 2), (9, 2), (10, 2), (7, 3), (9, 3)):
        graphs.append((f"cyclepow{n}_{k}", cycle_power(n, k)))
    for n in (4, 6, 8, 10):
        graphs.append((f"star{n}", star_graph(n)))
    for n in (3, 4, 5, 6):
        graphs.append((f"complete{n}", complete_graph(n)))
    graphs.append(("path5", path_graph(5)))
    drawn = 0
    while drawn < 6:
        n = int(rng.integers(6, 11))
        g = erdos_renyi(n, 0.45, rng)
        if g.m == 0:
            continue
        graphs.append((f"er{drawn}_{n}", g))
        drawn += 1
    for n in (8, 10):
        graphs.append((f"cycle_union{n}", union(cycle_power(n, 1), erdos_renyi(n, 0.2, rng))))

    specs = [
        (NoisyThreshold(2, 0.3, 1.0), None),
        (NoisyThreshold(2, 0.2, 0.7), None),
        (Simple(0.4), None),
        (Probit(2.0, 1.0), None),
        (Logit(2.0, 0.8), None),
        (FractionalThreshold(0.5, 0.25, 0.9), None),
        (NoisyThreshold(2, 0.35, 1.0), CYCLE1_ONLY),
        (NoisyThreshold(3, 0.3, 0.9), None),
    ]
    cases = []
    for i, (name, g) in enumerate(graphs):
        seeds = [int(x) for x in g.edges[0]]
        spec, labels = specs[i % len(specs)]
        if labels is not None and g.label_count(EdgeLabel.CYCLE1) == 0:
            spec, labels = specs[0]
        cases.append({"name": name, "graph": g, "seeds": seeds, "spec": spec,
                      "config": DynamicsConfig(sub_threshold_labels=labels)})
    return cases


def write_corpus(directory, seed: int = 20240601) -> Path:
    """Write corpus edge lists plus ``manifest.json`` with closures and exact expected times."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for case in corpus_cases(seed):
        g = case["graph"]
        fname = f"{case['name']}.edges"
        write_edge_list(g, directory / fname)
        closure = {}
        for theta in (2, 3):
            final, rounds = deterministic_closure(g, case["seeds"], theta)
            closure[str(theta)] = {"final": sorted(final), "rounds": rounds}
        labels = case["config"].sub_threshold_labels
        res = exact_expected_time(g, case["seeds"], case["spec"], case["config"])
        entries.append({
            "name": case["name"],
            "file": fname,
            "seeds": case["seeds"],
            "spec": _spec_to_dict(case["spec"]),
            "sub_threshold_labels": None if labels is None else sorted(l.token for l in labels),
            "closure": closure,
            "expected_time": res.as_json(),
        })
    path = directory / "manifest.json"
    path.write_text(json.dumps({"seed": seed, "cases": entries}, indent=2) + "\n")
    return path


def load_corpus(directory) -> list[dict]:
    """Read a corpus written by :func:`write_corpus`, returning ready-to-use cases."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    cases = []
    for e in manifest["cases"]:
        labels = e["sub_threshold_labels"]
        cases.append({
            "name": e["name"],
            "graph": load_edge_list(directory / e["file"]),
            "seeds": e["seeds"],
            "spec": spec_from_dict(e["spec"]),
            "config": DynamicsConfig(sub_threshold_labels=None if labels is None else
                                     frozenset(EdgeLabel.parse(t) for t in labels)),
            "closure": e["closure"],
            "expected_time": e["expected_time"],
        })
    return cases

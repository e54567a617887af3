"""Synchronous discrete-time contagion on a labeled graph.

Every round, each susceptible node looks at the round-start state: ``x`` is
its number of *active* infected neighbors and ``x_allowed`` the number
reached through edge labels admitting sub-threshold adoption. It adopts with
the probability given by its activation spec. Independently, each node that
was active at the start of the round turns inactive with probability
``gamma``; inactive nodes still count as infected but no longer influence
neighbors.

Bernoulli draws are made only for candidates whose probability is strictly
between 0 and 1, in increasing node order, followed by deactivation draws.
Deterministic settings therefore consume no randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Collection, Sequence

import numpy as np

from .activation import ActivationSpec
from .errors import InvalidParameterError
from .graphs import EdgeLabel, Graph


class NodeStatus(IntEnum):
    SUSCEPTIBLE = 0
    ACTIVE = 1
    INACTIVE = 2


@dataclass(frozen=True)
class DynamicsConfig:
    """Run-level rules.

    ``sub_threshold_labels`` of ``None`` admits sub-threshold adoption
    through every edge; ``max_rounds`` of ``None`` means ``20 * n``.
    """

    sub_threshold_labels: frozenset | None = None
    gamma: float = 0.0
    stop_fraction: float = 1.0
    max_rounds: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidParameterError("gamma must lie in [0, 1]")
        if not 0.0 < self.stop_fraction <= 1.0:
            raise InvalidParameterError("stop_fraction must lie in (0, 1]")
        if self.max_rounds is not None and self.max_rounds < 0:
            raise InvalidParameterError("max_rounds must be non-negative")
        if self.sub_threshold_labels is not None:
            try:
                labels = frozenset(EdgeLabel.parse(lab) if isinstance(lab, str) else EdgeLabel(lab)
                                   for lab in self.sub_threshold_labels)
            except ValueError as exc:
                raise InvalidParameterError(str(exc)) from None
            object.__setattr__(self, "sub_threshold_labels", labels)

    def rounds_cap(self, n: int) -> int:
        return 20 * n if self.max_rounds is None else self.max_rounds

    def target_count(self, n: int) -> int:
        """Smallest infected count whose fraction reaches ``stop_fraction``."""
        return max(1, math.ceil(self.stop_fraction * n - 1e-9))


CYCLE1_ONLY = frozenset({EdgeLabel.CYCLE1})


@dataclass(frozen=True)
class ContagionState:
    round: int
    status: np.ndarray

    @classmethod
    def from_seeds(cls, n: int, seeds: Collection[int]) -> "ContagionState":
        status = np.zeros(n, dtype=np.int8)
        status[list(seeds)] = NodeStatus.ACTIVE
        return cls(0, status)

    @property
    def infected(self) -> np.ndarray:
        return np.flatnonzero(self.status != NodeStatus.SUSCEPTIBLE)

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.status == NodeStatus.ACTIVE)


@dataclass
class RunOutcome:
    spread_time: int | None
    censored: bool
    final_fraction: float
    rounds: int
    trajectory: np.ndarray | None = field(default=None, repr=False)

    def trajectory_csv(self) -> str:
        """``round,infected_count,active_count`` rows (requires a recorded trajectory)."""
        if self.trajectory is None:
            raise ValueError("run was not asked to record a trajectory")
        rows = ["round,infected_count,active_count"]
        rows += [f"{r},{i},{a}" for r, i, a in self.trajectory.tolist()]
        return "\n".join(rows) + "\n"


def adjacency_positions(indptr: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Positions in the CSR ``indices`` array covering the neighbor lists of ``nodes``."""
    starts = indptr[nodes]
    lens = indptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(starts - (np.cumsum(lens) - lens), lens)
    return offsets + np.arange(total, dtype=np.int64)


class _Engine:
    """Incremental neighbor counts for one replicate."""

    def __init__(self, graph: Graph, spec: ActivationSpec, config: DynamicsConfig,
                 status: np.ndarray):
        self.g = graph
        self.spec = spec
        self.gamma = config.gamma
        self.status = np.array(status, dtype=np.int8)
        n = graph.n
        allowed = config.sub_threshold_labels
        self.restricted = allowed is not None and not set(EdgeLabel) <= allowed
        if self.restricted:
            self.adj_allowed = np.isin(graph.adj_labels, np.array(sorted(allowed), dtype=np.uint8))
        self.x = np.zeros(n, dtype=np.int64)
        self.xa = np.zeros(n, dtype=np.int64) if self.restricted else self.x
        self._bump(np.flatnonzero(self.status == NodeStatus.ACTIVE), 1)
        self.infected = int(np.count_nonzero(self.status))
        self.active_count = int(np.count_nonzero(self.status == NodeStatus.ACTIVE))

    def _bump(self, nodes: np.ndarray, delta: int) -> None:
        if nodes.size == 0:
            return
        pos = adjacency_positions(self.g.indptr, nodes)
        nb = self.g.indices[pos]
        np.add.at(self.x, nb, delta)
        if self.restricted:
            np.add.at(self.xa, nb[self.adj_allowed[pos]], delta)

    def step(self, rng: np.random.Generator) -> bool:
        """Advance one round; return False if no susceptible node had positive probability."""
        sus = self.status == NodeStatus.SUSCEPTIBLE
        if self.spec.spontaneous:
            cand = np.flatnonzero(sus)
        else:
            cand = np.flatnonzero(sus & (self.x > 0))
        p = self.spec.probability(self.x[cand], self.xa[cand], self.g.degree[cand])
        live = bool(np.any(p > 0))
        adopt = p >= 1.0
        mid = np.flatnonzero((p > 0.0) & (p < 1.0))
        if mid.size:
            adopt[mid] = rng.random(mid.size) < p[mid]
        new = cand[adopt]

        if self.gamma > 0.0 and self.active_count:
            active = np.flatnonzero(self.status == NodeStatus.ACTIVE)
            if self.gamma >= 1.0:
                retire = active
            else:
                retire = active[rng.random(active.size) < self.gamma]
        else:
            retire = np.empty(0, dtype=np.int64)

        self.status[new] = NodeStatus.ACTIVE
        self.status[retire] = NodeStatus.INACTIVE
        self._bump(new, 1)
        self._bump(retire, -1)
        self.infected += new.size
        self.active_count += new.size - retire.size
        return live


def step(graph: Graph, state: ContagionState, spec: ActivationSpec, config: DynamicsConfig,
         rng: np.random.Generator) -> ContagionState:
    """One synchronous round from ``state``; returns a new state with ``round + 1``."""
    eng = _Engine(graph, spec, config, state.status)
    eng.step(rng)
    return ContagionState(state.round + 1, eng.status)


def _check_seeds(n: int, seeds: Sequence[int]) -> np.ndarray:
    s = np.asarray(list(seeds), dtype=np.int64)
    if s.size == 0:
        raise InvalidParameterError("seed set must be non-empty")
    if np.unique(s).size != s.size:
        raise InvalidParameterError("seeds must be distinct")
    if s.min() < 0 or s.max() >= n:
        raise InvalidParameterError("seed outside node range")
    return s


def run(graph: Graph, spec: ActivationSpec, config: DynamicsConfig, seeds: Sequence[int],
        rng: np.random.Generator, record_trajectory: bool = False) -> RunOutcome:
    """Iterate rounds until the infected fraction reaches ``config.stop_fraction``.

    The run is censored when the target is not reached within the round cap.
    It stops early (censored) once no susceptible node can adopt any more,
    since counts of active neighbors never increase after that point.
    """
    n = graph.n
    s = _check_seeds(n, seeds)
    eng = _Engine(graph, spec, config, ContagionState.from_seeds(n, s).status)
    target = config.target_count(n)
    cap = config.rounds_cap(n)
    traj = [(0, eng.infected, eng.active_count)] if record_trajectory else None

    spread_time = 0 if eng.infected >= target else None
    rounds = 0
    while spread_time is None and rounds < cap:
        live = eng.step(rng)
        rounds += 1
        if traj is not None:
            traj.append((rounds, eng.infected, eng.active_count))
        if eng.infected >= target:
            spread_time = rounds
        elif not live:
            break
    return RunOutcome(
        spread_time=spread_time,
        censored=spread_time is None,
        final_fraction=eng.infected / n,
        rounds=rounds,
        trajectory=np.array(traj, dtype=np.int64) if traj is not None else None,
    )


def seed_adjacent_pair(graph: Graph, rng: np.random.Generator,
                       cycle_mode: bool = False) -> tuple[int, int]:
    """Endpoints of a uniformly random edge (a random ``CYCLE1`` edge in cycle mode)."""
    if cycle_mode:
        eligible = np.flatnonzero(graph.labels == EdgeLabel.CYCLE1)
    else:
        eligible = np.arange(graph.m)
    if eligible.size == 0:
        raise InvalidParameterError(
            "no Cycle1 edge to seed from" if cycle_mode else "graph has no edges to seed from")
    e = graph.edges[eligible[rng.integers(eligible.size)]]
    return int(e[0]), int(e[1])

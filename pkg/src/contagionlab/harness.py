"""Monte Carlo replication, seed derivation and summary statistics.

Each replicate gets its own 64-bit seed hashed from ``(root_seed, condition,
replicate)``; independent streams for graph draw, intervention, seeding and
dynamics are hashed from that seed and a stream tag. A replicate can thus be
re-run in isolation from the ``seed`` column of the results file, and
results do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .activation import ActivationSpec, make_activation
from .dynamics import DynamicsConfig, RunOutcome, run, seed_adjacent_pair
from .errors import ConfigError, ContagionLabError, InvalidParameterError, UndefinedCIError
from .graphs import (EdgeLabel, Graph, complete_graph, cycle_power, cycle_union_random,
                     erdos_renyi, eta_rewired_c2, load_edge_list, path_graph, star_graph,
                     watts_strogatz)
from .interventions import InterventionSpec, apply_intervention

logger = logging.getLogger(__name__)

STREAMS = ("graph", "intervention", "seeding", "dynamics")
WORKERS_ENV = "CONTAGIONLAB_WORKERS"


# -- seeds -------------------------------------------------------------------------

def derive_seed(root_seed: int, condition: int, replicate: int) -> int:
    ss = np.random.SeedSequence(int(root_seed), spawn_key=(int(condition), int(replicate)))
    lo, hi = ss.generate_state(2, dtype=np.uint32).tolist()
    return (hi << 32) | lo


def stream_rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(STREAMS.index(stream),)))


# -- configuration ---------------------------------------------------------------------

RANDOM_MODELS = ("erdos_renyi", "cycle_union", "eta_c2", "watts_strogatz")
MODELS = ("cycle_power", "complete", "star", "path", "file") + RANDOM_MODELS


@dataclass(frozen=True)
class GraphSource:
    """Where a replicate's graph comes from: a generator with parameters or an edge-list file.

    For ``cycle_union`` exactly one of ``p``, ``c`` or ``D`` sets the random
    part; for ``eta_c2`` either ``eta`` or ``delta`` (with ``eta = n**delta``).
    ``watts_strogatz`` uses ``k`` and the per-edge rewiring probability
    ``rewire_p``. With ``fixed`` set, random sources are drawn once per
    condition (the draw replicate 0 would make) instead of once per replicate.
    """

    model: str
    n: int | None = None
    k: int | None = None
    p: float | None = None
    c: float | None = None
    D: float | None = None
    eta: float | None = None
    delta: float | None = None
    eta_max: float | None = None
    rewire_p: float | None = None
    path: str | None = None
    fixed: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidParameterError(f"unknown graph model {self.model!r}; expected one of {MODELS}")
        if self.model == "file":
            if not self.path:
                raise InvalidParameterError("graph model 'file' needs a path")
        elif self.n is None:
            raise InvalidParameterError(f"graph model {self.model!r} needs n")

    @property
    def is_random(self) -> bool:
        return self.model in RANDOM_MODELS

    @property
    def resolved_eta(self) -> float | None:
        if self.eta is not None:
            return self.eta
        if self.delta is not None and self.n is not None:
            return float(self.n) ** self.delta
        return None

    def build(self, rng: np.random.Generator | None = None) -> Graph:
        m = self.model
        if m == "file":
            return load_edge_list(self.path)
        if m == "cycle_power":
            return cycle_power(self.n, self.k or 1)
        if m == "complete":
            return complete_graph(self.n)
        if m == "star":
            return star_graph(self.n)
        if m == "path":
            return path_graph(self.n)
        if rng is None:
            raise InvalidParameterError(f"random graph model {m!r} needs an rng")
        if m == "erdos_renyi":
            p = self.p if self.p is not None else (self.c / self.n if self.c is not None else None)
            if p is None:
                raise InvalidParameterError("erdos_renyi needs p or c")
            return erdos_renyi(self.n, p, rng)
        if m == "cycle_union":
            return cycle_union_random(self.n, self.k or 1, rng, p=self.p, c=self.c, D=self.D)
        if m == "eta_c2":
            eta = self.resolved_eta
            if eta is None:
                raise InvalidParameterError("eta_c2 needs eta or delta")
            return eta_rewired_c2(self.n, eta, rng, eta_max=self.eta_max)
        if self.rewire_p is None:
            raise InvalidParameterError("watts_strogatz needs rewire_p")
        return watts_strogatz(self.n, self.k or 1, self.rewire_p, rng)


SEEDING_MODES = ("auto", "adjacent", "cycle1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a set of Monte Carlo conditions.

    ``activation`` is a mapping with a ``kind`` key plus that variant's
    parameters. ``axes`` maps axis names (see :data:`AXES`) to value lists;
    conditions are their cartesian product in the given order. ``seeding``
    is one of :data:`SEEDING_MODES` or an explicit list of node ids.
    """

    graph: GraphSource
    activation: dict
    dynamics: DynamicsConfig = DynamicsConfig()
    intervention: InterventionSpec = InterventionSpec()
    replicates: int = 100
    root_seed: int = 0
    experiment_id: str = "experiment"
    seeding: str | tuple = "auto"
    axes: dict = field(default_factory=dict)
    slopes: tuple = ()

    def __post_init__(self):
        if self.replicates < 1:
            raise InvalidParameterError("replicates must be >= 1")
        for name, values in self.axes.items():
            if name not in AXES:
                raise InvalidParameterError(f"unknown sweep axis {name!r}; expected one of {sorted(AXES)}")
            if not values:
                raise InvalidParameterError(f"sweep axis {name!r} is empty")
        for name in self.slopes:
            if name not in self.axes:
                raise InvalidParameterError(f"slope axis {name!r} is not a sweep axis")
        if isinstance(self.seeding, str) and self.seeding not in SEEDING_MODES:
            raise InvalidParameterError(f"seeding must be one of {SEEDING_MODES} or a node list")
        make_activation(**self.activation)

    def conditions(self) -> list["Condition"]:
        names = list(self.axes)
        out = []
        for i, values in enumerate(itertools.product(*(self.axes[a] for a in names))):
            out.append(_make_condition(self, i, dict(zip(names, values))))
        return out


# axis name -> (section, field)
AXES = {
    "n": ("graph", "n"), "k": ("graph", "k"), "p": ("graph", "p"), "c": ("graph", "c"),
    "D": ("graph", "D"), "eta": ("graph", "eta"), "delta": ("graph", "delta"),
    "rewire_p": ("graph", "rewire_p"), "path": ("graph", "path"),
    "q": ("activation", "q"), "rho": ("activation", "rho"), "theta": ("activation", "theta"),
    "beta": ("activation", "beta"), "sigma": ("activation", "sigma"),
    "theta_frac": ("activation", "theta_frac"),
    "gamma": ("dynamics", "gamma"), "stop_fraction": ("dynamics", "stop_fraction"),
    "fraction": ("intervention", "fraction"), "intervention": ("intervention", "kind"),
}


@dataclass(frozen=True)
class Condition:
    index: int
    values: dict
    graph: GraphSource
    spec: ActivationSpec
    dynamics: DynamicsConfig
    intervention: InterventionSpec
    seeding: str | tuple

    def columns(self) -> dict:
        """Axis columns written to the results file (blank when not applicable)."""
        g = self.graph
        return {
            "n": g.n if g.n is not None else "",
            "k": g.k if g.k is not None else "",
            "q": getattr(self.spec, "q", ""),
            "eta": _fmt(g.resolved_eta) if g.model == "eta_c2" else "",
            "D": g.D if g.D is not None else "",
            "fraction": self.intervention.fraction if self.intervention.kind != "none" else "",
            "intervention": self.intervention.kind,
        }


def _make_condition(cfg: ExperimentConfig, index: int, values: dict) -> Condition:
    graph = dataclasses.asdict(cfg.graph)
    act = dict(cfg.activation)
    dyn = {f.name: getattr(cfg.dynamics, f.name) for f in dataclasses.fields(cfg.dynamics)}
    inter = dataclasses.asdict(cfg.intervention)
    sections = {"graph": graph, "activation": act, "dynamics": dyn, "intervention": inter}
    for name, value in values.items():
        section, key = AXES[name]
        sections[section][key] = value
        if section == "graph" and key in ("eta", "delta"):
            graph["delta" if key == "eta" else "eta"] = None
        if section == "graph" and key in ("p", "c", "D"):
            for other in {"p", "c", "D"} - {key}:
                graph[other] = None
    try:
        return Condition(index, dict(values), GraphSource(**graph), make_activation(**act),
                         DynamicsConfig(**dyn), InterventionSpec(**inter), cfg.seeding)
    except (InvalidParameterError, TypeError) as exc:
        raise ConfigError(f"condition {index} {values}: {exc}") from None


# -- replicates --------------------------------------------------------------------

@dataclass
class Replicate:
    replicate: int
    seed: int
    outcome: RunOutcome


@dataclass
class SampleSet:
    condition: Condition
    replicates: list[Replicate]

    @property
    def outcomes(self) -> list[RunOutcome]:
        return [r.outcome for r in self.replicates]

    def times(self) -> np.ndarray:
        """Spread times with NaN for censored replicates."""
        return np.array([np.nan if o.censored else o.spread_time for o in self.outcomes], dtype=float)


def pick_seeds(graph: Graph, mode, rng: np.random.Generator) -> tuple[int, ...]:
    if not isinstance(mode, str):
        return tuple(int(s) for s in mode)
    if mode == "auto":
        cycle = graph.label_count(EdgeLabel.CYCLE1) > 0
        return seed_adjacent_pair(graph, rng, cycle_mode=cycle)
    return seed_adjacent_pair(graph, rng, cycle_mode=(mode == "cycle1"))


def run_replicate(cond: Condition, replicate: int, root_seed: int,
                  base_graph: Graph | None = None) -> Replicate:
    seed = derive_seed(root_seed, cond.index, replicate)
    if base_graph is None:
        base_graph = cond.graph.build(stream_rng(seed, "graph"))
    g = apply_intervention(base_graph, cond.intervention, stream_rng(seed, "intervention"))
    seeds = pick_seeds(g, cond.seeding, stream_rng(seed, "seeding"))
    outcome = run(g, cond.spec, cond.dynamics, seeds, stream_rng(seed, "dynamics"))
    return Replicate(replicate, seed, outcome)


def shared_graph(cond: Condition, root_seed: int) -> Graph | None:
    """Graph reused by every replicate of a condition, or None for per-replicate draws."""
    if not cond.graph.is_random:
        return cond.graph.build()
    if cond.graph.fixed:
        return cond.graph.build(stream_rng(derive_seed(root_seed, cond.index, 0), "graph"))
    return None


def _run_chunk(cond: Condition, reps: Sequence[int], root_seed: int) -> list[Replicate]:
    try:
        base = shared_graph(cond, root_seed)
        return [run_replicate(cond, i, root_seed, base) for i in reps]
    except ContagionLabError as exc:
        raise type(exc)(f"condition {cond.index} {cond.values}: {exc}") from exc


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def monte_carlo(config: ExperimentConfig, workers: int | None = None,
                on_condition: Callable[[SampleSet], None] | None = None) -> list[SampleSet]:
    """Run every condition ``config.replicates`` times.

    ``on_condition`` is called with each finished :class:`SampleSet`, in
    condition order, so callers can stream output.
    """
    workers = default_workers() if workers is None else max(1, workers)
    conds = config.conditions()
    R = config.replicates
    out = []
    if workers == 1:
        for cond in conds:
            ss = SampleSet(cond, _run_chunk(cond, range(R), config.root_seed))
            out.append(ss)
            if on_condition:
                on_condition(ss)
        return out

    chunk = max(1, math.ceil(R / (4 * workers)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [[pool.submit(_run_chunk, cond, range(s, min(R, s + chunk)), config.root_seed)
                    for s in range(0, R, chunk)] for cond in conds]
        for cond, futs in zip(conds, futures):
            reps = sorted((r for f in futs for r in f.result()), key=lambda r: r.replicate)
            ss = SampleSet(cond, reps)
            out.append(ss)
            if on_condition:
                on_condition(ss)
    return out


# -- statistics ----------------------------------------------------------------------

def _uncensored(samples) -> tuple[np.ndarray, int]:
    vals = []
    censored = 0
    for s in samples:
        if isinstance(s, RunOutcome):
            s = None if s.censored else s.spread_time
        if s is None or (isinstance(s, float) and math.isnan(s)):
            censored += 1
        else:
            vals.append(float(s))
    return np.array(vals, dtype=float), censored


def mean_ci(samples, z: float = 1.96) -> tuple[float, float]:
    """Mean over uncensored samples and the normal-interval half width ``z * sd / sqrt(count)``.

    Censored samples are given as ``None``, ``nan`` or censored
    :class:`RunOutcome` objects and are excluded.
    """
    vals, _ = _uncensored(samples)
    if vals.size < 2:
        raise UndefinedCIError(f"need at least 2 uncensored samples, got {vals.size}")
    return float(vals.mean()), float(z * vals.std(ddof=1) / math.sqrt(vals.size))


def censored_count(samples) -> int:
    return _uncensored(samples)[1]


def bootstrap_ci(samples, rng: np.random.Generator, n_boot: int = 2000,
                 level: float = 0.95) -> tuple[float, float, float]:
    """Percentile bootstrap interval for the uncensored mean: ``(mean, low, high)``."""
    vals, _ = _uncensored(samples)
    if vals.size < 2:
        raise UndefinedCIError(f"need at least 2 uncensored samples, got {vals.size}")
    means = vals[rng.integers(vals.size, size=(n_boot, vals.size))].mean(axis=1)
    a = (1 - level) / 2
    lo, hi = np.quantile(means, [a, 1 - a])
    return float(vals.mean()), float(lo), float(hi)


@dataclass(frozen=True)
class ECDF:
    """Right-continuous empirical CDF of spread times over all replicates.

    Censored replicates stay in the denominator but never add mass below the
    censoring point, so ``F`` tops out at ``1 - censored / total``.
    """

    times: np.ndarray
    total: int
    censor_point: float | None = None

    def __call__(self, t):
        return np.searchsorted(self.times, np.asarray(t, dtype=float), side="right") / self.total

    @property
    def deficit(self) -> float:
        return 1.0 - self.times.size / self.total

    def breakpoints(self) -> tuple[list[float], list[float]]:
        xs = np.unique(self.times)
        return xs.tolist(), self(xs).tolist()


def ecdf(samples, censor_point: float | None = None) -> ECDF:
    samples = list(samples)
    if not samples:
        raise InvalidParameterError("ecdf of an empty sample")
    vals, _ = _uncensored(samples)
    return ECDF(np.sort(vals), len(samples), censor_point)


def ecdf_dominates(fast: ECDF, slow: ECDF, tol: float = 1e-12) -> bool:
    """True iff ``fast`` lies on or above ``slow`` at every sample point, strictly somewhere."""
    pts = np.union1d(fast.times, slow.times)
    if pts.size == 0:
        return False
    f, s = fast(pts), slow(pts)
    return bool(np.all(f >= s - tol) and np.any(f > s + tol))


def loglog_slope(points: Iterable[tuple[float, float]]) -> float:
    """Least-squares slope of ``log(y)`` against ``log(x)``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise InvalidParameterError("need at least two (x, y) points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise InvalidParameterError("log-log fit needs positive finite values")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lx) == 0:
        raise InvalidParameterError("log-log fit needs at least two distinct x values")
    return float(np.polyfit(lx, ly, 1)[0])


def summarize(ss: SampleSet) -> dict:
    outcomes = ss.outcomes
    vals, cens = _uncensored(outcomes)
    row = {
        "condition": ss.condition.index,
        "values": ss.condition.values,
        "replicates": len(outcomes),
        "censored_count": cens,
        "mean": float(vals.mean()) if vals.size else None,
        "ci_half_width": None,
    }
    if vals.size >= 2:
        row["mean"], row["ci_half_width"] = mean_ci(outcomes)
    xs, fs = ecdf(outcomes).breakpoints()
    row["ecdf"] = {"t": xs, "F": fs}
    return row


def sweep_slopes(sets: Sequence[SampleSet], axes: Sequence[str]) -> list[dict]:
    """Log-log slope of mean spread time along each axis, per combination of the other axes."""
    out = []
    for axis in axes:
        groups: dict[tuple, list[tuple[float, float]]] = {}
        for ss in sets:
            vals, _ = _uncensored(ss.outcomes)
            others = tuple((k, v) for k, v in ss.condition.values.items() if k != axis)
            if vals.size:
                groups.setdefault(others, []).append((float(ss.condition.values[axis]),
                                                      float(vals.mean())))
        for others, pts in groups.items():
            entry = {"axis": axis, "fixed": dict(others), "points": pts, "slope": None}
            try:
                entry["slope"] = loglog_slope(pts)
            except InvalidParameterError as exc:
                entry["error"] = str(exc)
            out.append(entry)
    return out


# -- output ----------------------------------------------------------------------------

RESULT_COLUMNS = ("experiment_id", "condition", "n", "k", "q", "eta", "D", "fraction",
                  "intervention", "replicate", "spread_time", "censored", "final_fraction", "seed")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def result_rows(experiment_id: str, ss: SampleSet) -> list[list[str]]:
    cols = ss.condition.columns()
    rows = []
    for r in ss.replicates:
        o = r.outcome
        rows.append([
            experiment_id, str(ss.condition.index),
            *(_fmt(cols[c]) for c in ("n", "k", "q", "eta", "D", "fraction", "intervention")),
            str(r.replicate), "" if o.censored else str(o.spread_time),
            "1" if o.censored else "0", repr(float(o.final_fraction)), str(r.seed),
        ])
    return rows


class ResultsWriter:
    """Streams long-format result rows; every row is flushed whole."""

    def __init__(self, fh: io.TextIOBase, experiment_id: str, header: dict):
        self.fh = fh
        self.experiment_id = experiment_id
        for k, v in header.items():
            fh.write(f"# {k}: {v}\n")
        self.writer = csv.writer(fh, lineterminator="\n")
        self.writer.writerow(RESULT_COLUMNS)
        fh.flush()

    def write(self, ss: SampleSet) -> None:
        self.writer.writerows(result_rows(self.experiment_id, ss))
        self.fh.flush()


def summary_document(config_dict: dict, config_hash: str, root_seed: int,
                     sets: Sequence[SampleSet], slope_axes: Sequence[str] = ()) -> dict:
    doc = {
        "config_hash": config_hash,
        "root_seed": root_seed,
        "config": config_dict,
        "conditions": [summarize(ss) for ss in sets],
    }
    if slope_axes:
        doc["slopes"] = sweep_slopes(sets, slope_axes)
    return doc


def dump_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")

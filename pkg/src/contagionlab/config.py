"""Experiment configuration files.

A config is a YAML mapping with the sections ``graph``, ``activation``,
``dynamics``, ``intervention``, ``experiment`` and ``output``::

    graph:
      model: cycle_union        # see harness.MODELS
      n: 1000
      k: 1
      c: 2                      # or p / D
    activation:
      kind: noisy_threshold     # simple | noisy_threshold | fractional | probit | logit
      theta: 2
      q: 0.02
      rho: 1.0
    dynamics:
      sub_threshold_labels: all # or a list such as [cycle1]
      gamma: 0.0
      stop_fraction: 1.0
      max_rounds: null          # null -> 20 * n
      seeding: auto             # auto | adjacent | cycle1 | [u, v, ...]
    intervention:
      kind: none                # none | rewire | add_random | add_triad_closing
      fraction: 0.1
      sequential: false
    experiment:
      id: fig4b
      replicates: 500
      root_seed: 7
      workers: 1
      axes: {q: [0.002, 0.02]}
      slopes: []
    output:
      dir: out
      results: results.csv
      summary: summary.json

Unknown sections or keys are rejected with the line they appear on.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from .dynamics import DynamicsConfig
from .errors import ConfigError, ContagionLabError
from .graphs import EdgeLabel
from .harness import AXES, ExperimentConfig, GraphSource
from .interventions import InterventionSpec

SCHEMA = {
    "graph": {"model": None, "n": None, "k": None, "p": None, "c": None, "D": None, "eta": None,
              "delta": None, "eta_max": None, "rewire_p": None, "path": None, "fixed": False},
    "activation": {"kind": "noisy_threshold", "theta": None, "q": None, "rho": None, "beta": None,
                   "sigma": None, "theta_frac": None},
    "dynamics": {"sub_threshold_labels": "all", "gamma": 0.0, "stop_fraction": 1.0,
                 "max_rounds": None, "seeding": "auto"},
    "intervention": {"kind": "none", "fraction": 0.0, "sequential": False},
    "experiment": {"id": "experiment", "replicates": 100, "root_seed": 0, "workers": None,
                   "axes": {}, "slopes": []},
    "output": {"dir": ".", "results": "results.csv", "summary": "summary.json"},
}


def _key_lines(node, prefix="", out=None) -> dict:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}{k.value}"
            out[path] = k.start_mark.line + 1
            _key_lines(v, path + ".", out)
    return out


def parse_config(text: str, base_dir: Path | str = ".") -> tuple[ExperimentConfig, dict]:
    """Parse config text into an :class:`ExperimentConfig` and the fully resolved mapping."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML syntax error: {exc.problem}", line) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML error: {exc}") from None
    lines = _key_lines(node)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of sections")

    resolved = copy.deepcopy(SCHEMA)
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}", lines.get(str(section)))
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping", lines.get(section))
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}", lines.get(f"{section}.{key}"))
            resolved[section][key] = value

    def fail(msg, key):
        raise ConfigError(msg, lines.get(key))

    g = resolved["graph"]
    if g["model"] is None:
        fail("graph.model is required", "graph")
    if g["path"] is not None:
        g["path"] = str((Path(base_dir) / g["path"]).resolve())
    act = {k: v for k, v in resolved["activation"].items() if v is not None}

    d = resolved["dynamics"]
    labels = d["sub_threshold_labels"]
    if labels == "all" or labels is None:
        label_set = None
        d["sub_threshold_labels"] = "all"
    else:
        if isinstance(labels, str):
            labels = [labels]
        try:
            label_set = frozenset(EdgeLabel.parse(str(t)) for t in labels)
        except ValueError as exc:
            fail(str(exc), "dynamics.sub_threshold_labels")
        d["sub_threshold_labels"] = sorted(lab.token for lab in label_set)
    seeding = d["seeding"]
    if isinstance(seeding, list):
        seeding = tuple(int(s) for s in seeding)

    e = resolved["experiment"]
    axes = e["axes"] or {}
    if not isinstance(axes, dict):
        fail("experiment.axes must be a mapping of axis -> list", "experiment.axes")
    for name, values in axes.items():
        if name not in AXES:
            fail(f"unknown sweep axis {name!r}", f"experiment.axes.{name}")
        if not isinstance(values, list) or not values:
            fail(f"sweep axis {name!r} must be a non-empty list", f"experiment.axes.{name}")
    if "path" in axes:
        axes["path"] = [str((Path(base_dir) / p).resolve()) for p in axes["path"]]
    slopes = e["slopes"] or []
    if isinstance(slopes, str):
        slopes = [slopes]
    e["slopes"] = list(slopes)

    try:
        cfg = ExperimentConfig(
            graph=GraphSource(**g),
            activation=act,
            dynamics=DynamicsConfig(sub_threshold_labels=label_set, gamma=float(d["gamma"]),
                                    stop_fraction=float(d["stop_fraction"]),
                                    max_rounds=d["max_rounds"]),
            intervention=InterventionSpec(**resolved["intervention"]),
            replicates=int(e["replicates"]),
            root_seed=int(e["root_seed"]),
            experiment_id=str(e["id"]),
            seeding=seeding,
            axes=dict(axes),
            slopes=tuple(slopes),
        )
        cfg.conditions()
    except ContagionLabError as exc:
        raise ConfigError(str(exc)) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg, resolved


def load_config(path) -> tuple[ExperimentConfig, dict]:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dump_config(resolved: dict) -> str:
    return yaml.safe_dump(resolved, sort_keys=False, default_flow_style=None)

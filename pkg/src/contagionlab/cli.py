"""Command-line entry point: ``contagionlab {generate,run,sweep,oracle,stats}``.

Exit codes: 0 success, 1 configuration or parameter error, 2 I/O error,
3 graph too large for the exact oracle.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .activation import make_activation
from .config import config_hash, dump_config, load_config
from .dynamics import DynamicsConfig
from .errors import ConfigError, EdgeListError, InvalidParameterError, OracleSizeError
from .graphs import (EdgeLabel, complete_graph, cycle_power, cycle_union_random, erdos_renyi,
                     eta_rewired_c2, graph_stats, load_edge_list, path_graph, star_graph,
                     watts_strogatz, write_edge_list)
from .harness import ResultsWriter, default_workers, dump_json, monte_carlo, summary_document
from .oracle import deterministic_closure, exact_expected_time, write_corpus

log = logging.getLogger("contagionlab")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_ORACLE = 0, 1, 2, 3


def _kv(tokens) -> dict:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise InvalidParameterError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = yaml.safe_load(v)
    return out


def build_graph(model: str, params: dict, seed: int | None):
    """Graph for the ``generate`` and ``oracle`` subcommands."""
    rng = np.random.default_rng(seed)
    p = dict(params)

    def take(name, default=None, required=True):
        if name in p:
            return p.pop(name)
        if default is None and required:
            raise InvalidParameterError(f"model {model!r} needs {name}=...")
        return default

    n = int(take("n"))
    if model in ("c1", "c2"):
        g = cycle_power(n, int(model[1]))
    elif model == "cycle":
        g = cycle_power(n, int(take("k")))
    elif model == "er":
        g = erdos_renyi(n, float(take("p")), rng)
    elif model == "union":
        k = int(take("k"))
        kw = {key: float(p.pop(key)) for key in ("p", "c", "D") if key in p}
        g = cycle_union_random(n, k, rng, **kw)
    elif model == "eta-c2":
        eta = p.pop("eta", None)
        if eta is None:
            eta = float(n) ** float(take("delta"))
        g = eta_rewired_c2(n, float(eta), rng)
    elif model == "ws":
        g = watts_strogatz(n, int(take("k")), float(take("p")), rng)
    elif model == "complete":
        g = complete_graph(n)
    elif model == "star":
        g = star_graph(n)
    elif model == "path":
        g = path_graph(n)
    else:
        raise InvalidParameterError(f"unknown model {model!r}")
    if p:
        raise InvalidParameterError(f"unused parameters for {model!r}: {sorted(p)}")
    return g


def cmd_generate(args) -> int:
    g = build_graph(args.model, _kv(args.params), args.seed)
    header = [f"model: {args.model} {' '.join(args.params)}".rstrip(), f"seed: {args.seed}"]
    write_edge_list(g, args.out, header=header)
    print(json.dumps(graph_stats(g)))
    return EXIT_OK


def cmd_stats(args) -> int:
    g = load_edge_list(args.path)
    stats = graph_stats(g)
    stats["self_loops_dropped"] = g.meta.get("self_loops_dropped", 0)
    print(json.dumps(stats))
    return EXIT_OK


def _execute(args, require_axes: bool) -> int:
    cfg, resolved = load_config(args.config)
    if require_axes and not cfg.axes:
        raise ConfigError("sweep needs at least one axis under experiment.axes")
    out = resolved["output"]
    out_dir = Path(args.out_dir or Path(args.config).parent / out["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(resolved)
    workers = args.workers or resolved["experiment"]["workers"] or default_workers()

    (out_dir / "config.resolved.yaml").write_text(dump_config(resolved), encoding="utf-8")
    header = {"experiment_id": cfg.experiment_id, "config_hash": digest,
              "root_seed": cfg.root_seed}
    with open(out_dir / out["results"], "w", encoding="utf-8", newline="") as fh:
        writer = ResultsWriter(fh, cfg.experiment_id, header)

        def progress(ss):
            writer.write(ss)
            log.info("condition %d %s done", ss.condition.index, ss.condition.values)

        sets = monte_carlo(cfg, workers=workers, on_condition=progress)
    slope_axes = cfg.slopes if require_axes else ()
    doc = summary_document(resolved, digest, cfg.root_seed, sets, slope_axes)
    dump_json(doc, out_dir / out["summary"])
    if require_axes:
        dump_json({"config_hash": digest, "root_seed": cfg.root_seed,
                   "slopes": doc.get("slopes", [])}, out_dir / "slopes.json")
    censored = sum(c["censored_count"] for c in doc["conditions"])
    print(f"{len(sets)} condition(s), {len(sets) * cfg.replicates} replicate(s), "
          f"{censored} censored -> {out_dir}")
    return EXIT_OK


def cmd_run(args) -> int:
    return _execute(args, require_axes=False)


def cmd_sweep(args) -> int:
    return _execute(args, require_axes=True)


def cmd_oracle(args) -> int:
    if args.corpus:
        path = write_corpus(args.corpus)
        print(f"wrote {path}")
        return EXIT_OK
    if not args.source:
        raise InvalidParameterError("oracle needs a graph file or a generator model")
    src = args.source[0]
    if Path(src).exists():
        g = load_edge_list(src)
    else:
        g = build_graph(src, _kv(args.source[1:]), args.seed)
    params = {k: getattr(args, k) for k in ("theta", "q", "rho", "beta", "sigma", "theta_frac")
              if getattr(args, k) is not None}
    spec = make_activation(args.kind, **params)
    labels = None
    if args.labels and args.labels != "all":
        labels = frozenset(EdgeLabel.parse(t) for t in args.labels.split(","))
    config = DynamicsConfig(sub_threshold_labels=labels, stop_fraction=args.stop_fraction)
    doc = {"n": g.n, "m": g.m, "seeds": args.seeds}
    theta = getattr(spec, "theta", None)
    if isinstance(theta, int):
        final, rounds = deterministic_closure(g, args.seeds, theta)
        doc["closure"] = {"final": sorted(final), "rounds": rounds,
                          "complete": len(final) == g.n}
    res = exact_expected_time(g, args.seeds, spec, config)
    doc["expected_time"] = res.as_json()
    print(json.dumps(doc))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contagionlab",
                                 description="Complex-contagion simulations on labeled graphs.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a generated graph as an edge list")
    g.add_argument("model", help="c1, c2, cycle, er, union, eta-c2, ws, complete, star, path")
    g.add_argument("params", nargs="*", help="key=value generator parameters, e.g. n=100 k=2")
    g.add_argument("-o", "--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    for name, func, text in (("run", cmd_run, "run a Monte Carlo experiment"),
                             ("sweep", cmd_sweep, "run a sweep and fit log-log slopes")):
        r = sub.add_parser(name, help=text)
        r.add_argument("config")
        r.add_argument("--workers", type=int, default=None,
                       help="parallel worker processes (default: $CONTAGIONLAB_WORKERS or 1)")
        r.add_argument("--out-dir", default=None)
        r.set_defaults(func=func)

    o = sub.add_parser("oracle", help="exact closure and expected spread time on a small graph")
    o.add_argument("source", nargs="*", help="edge-list file, or model followed by key=value")
    o.add_argument("--seeds", type=int, nargs="+", default=[0, 1])
    o.add_argument("--kind", default="noisy_threshold")
    o.add_argument("--theta", type=int, default=None)
    o.add_argument("--q", type=float, default=None)
    o.add_argument("--rho", type=float, default=None)
    o.add_argument("--beta", type=float, default=None)
    o.add_argument("--sigma", type=float, default=None)
    o.add_argument("--theta-frac", dest="theta_frac", type=float, default=None)
    o.add_argument("--labels", default="all", help="'all' or comma list, e.g. cycle1")
    o.add_argument("--stop-fraction", type=float, default=1.0)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--corpus", default=None, help="write the small-graph corpus to this directory")
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("stats", help="summary statistics of an edge-list file")
    s.add_argument("path")
    s.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OracleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (EdgeListError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, InvalidParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points for experiments.

Exit codes: 0 on success, 2 for configuration problems (bad TOML, unknown
keys, missing files), 3 for failures at run time. Result bundles are byte
reproducible: no timestamps, stable float formatting, sorted JSON keys, and
every CSV opens with a comment carrying the config hash it came from.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import demand as dm
from . import metrics as mx
from . import model as mdl
from . import placement as pl
from .catalog import CacheSet, GraphError, RelationGraph, save_graph
from .demand import ConfigError, ScenarioConfig
from .explore import BfsSchedule


def config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(cfg.raw, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path: Path, header: list[str], rows: list[tuple], comment: str) -> None:
    lines = [f"# {comment}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary(path: Path, body: dict) -> None:
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- run ---------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = dm.load_config(args.config)
    h = config_hash(cfg)
    out = Path(args.out) if args.out else Path("results") / f"run-{h}"
    graph = dm.build_graph(cfg)
    cache = dm.build_cache(cfg, graph)
    traces = dm.run_demand(cfg, graph, cache)
    report = mx.chr_sequential(traces, k=cfg.demand.k)
    zero = mx.zero_cached_fraction(traces)

    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "chr.csv", ["step", "ratio", "n", "ci_halfwidth"],
              report.rows(), f"config_hash: {h}")
    write_csv(out / "zero_cached.csv", ["step", "fraction"],
              [(s, f) for s, f in sorted(zero.items())], f"config_hash: {h}")
    dm.save_traces(traces, out / "traces.jsonl")
    write_summary(out / "summary.json", {
        "config_hash": h,
        "report": report.to_dict(),
        "zero_cached": {str(s): f for s, f in sorted(zero.items())},
        "cache_size": len(cache.items),
        "graph_items": len(graph),
    })
    print(f"wrote {out} (aggregate hit rate {report.aggregate:.4f})")
    return 0


# --- sweep -------------------------------------------------------------------

_SWEEP_KEYS = ("kind", "width", "depth", "capacity", "alpha")


def sweep_cells(cfg: ScenarioConfig) -> list[dict]:
    """Grid rows for every combination in the [sweep] section.

    Every cell reuses the master seed, so per-session draws are common
    random numbers across cells and differences between cells reflect the
    parameters, not sampling noise.
    """
    spec_keys = [k for k in cfg.sweep if k not in _SWEEP_KEYS]
    if spec_keys:
        raise ConfigError([f"unknown sweep key {k!r} (allowed: {', '.join(_SWEEP_KEYS)})"
                           for k in spec_keys])
    if not cfg.sweep:
        raise ConfigError(["[sweep] section is empty"])
    axes = {k: list(cfg.sweep[k]) for k in _SWEEP_KEYS if k in cfg.sweep}
    graph = dm.build_graph(cfg)
    rows = []
    names = list(axes)
    for values in itertools.product(*(axes[k] for k in names)):
        cell = dict(zip(names, values))
        c = cfg
        if "capacity" in cell:
            c = replace(c, cache=replace(c.cache, capacity=int(cell["capacity"])))
        if "alpha" in cell:
            c = replace(c, demand=replace(c.demand, alpha=float(cell["alpha"])))
        rec = c.recommender
        if "kind" in cell:
            rec = replace(rec, kind=str(cell["kind"]))
        if "width" in cell:
            rec = replace(rec, width=int(cell["width"]), widths=())
        if "depth" in cell:
            rec = replace(rec, depth=int(cell["depth"]), widths=())
        c = replace(c, recommender=rec)
        cache = dm.build_cache(c, graph)
        traces = dm.run_demand(c, graph, cache)
        report = mx.chr_sequential(traces, k=c.demand.k)
        rows.append({
            "kind": c.recommender.kind,
            "width": c.recommender.width,
            "depth": c.recommender.depth,
            "capacity": c.cache.capacity,
            "alpha": c.demand.alpha,
            "chr": report.aggregate,
            "ci_halfwidth": report.ci_halfwidth,
            "hits": report.hits,
            "sessions": report.sessions,
        })
    return rows


def cmd_sweep(args) -> int:
    cfg = dm.load_config(args.config)
    h = config_hash(cfg)
    out = Path(args.out) if args.out else Path("results") / f"sweep-{h}"
    rows = sweep_cells(cfg)
    out.mkdir(parents=True, exist_ok=True)
    header = ["kind", "width", "depth", "capacity", "alpha",
              "chr", "ci_halfwidth", "hits", "sessions"]
    write_csv(out / "sweep.csv", header,
              [tuple(r[k] for k in header) for r in rows], f"config_hash: {h}")
    write_summary(out / "summary.json", {"config_hash": h, "cells": rows})
    print(f"wrote {out} ({len(rows)} cells)")
    return 0


# --- compare-caching ---------------------------------------------------------


def compare_rows(cfg: ScenarioConfig) -> list[dict]:
    policies = list(cfg.compare.get("policies", ["top_popular", "random"]))
    capacities = [int(x) for x in cfg.compare.get("capacities", [])]
    problems = []
    if not capacities:
        problems.append("[compare] needs a capacities list")
    for p in policies:
        if p not in ("top_popular", "random", "greedy"):
            problems.append(f"unknown compare policy {p!r}")
    if problems:
        raise ConfigError(problems)
    graph = dm.build_graph(cfg)
    rows = []
    for policy in policies:
        for cap in capacities:
            if policy == "random":
                rng = np.random.default_rng([cfg.seed, 10_000_019, cap])
                ids = tuple(rng.choice(graph.items, size=min(cap, len(graph)), replace=False))
                cache = CacheSet.from_ids(ids, capacity=cap)
            else:
                c = replace(cfg, cache=replace(cfg.cache, policy=policy, capacity=cap))
                cache = dm.build_cache(c, graph)
            c = replace(cfg, cache=replace(cfg.cache, policy=policy, capacity=cap))
            traces = dm.run_demand(c, graph, cache)
            report = mx.chr_sequential(traces, k=cfg.demand.k)
            rows.append({
                "policy": policy,
                "capacity": cap,
                "chr": report.aggregate,
                "ci_halfwidth": report.ci_halfwidth,
                "hits": report.hits,
                "sessions": report.sessions,
            })
    return rows


def cmd_compare(args) -> int:
    cfg = dm.load_config(args.config)
    h = config_hash(cfg)
    out = Path(args.out) if args.out else Path("results") / f"compare-{h}"
    rows = compare_rows(cfg)
    out.mkdir(parents=True, exist_ok=True)
    header = ["policy", "capacity", "chr", "ci_halfwidth", "hits", "sessions"]
    write_csv(out / "compare.csv", header,
              [tuple(r[k] for k in header) for r in rows], f"config_hash: {h}")
    write_summary(out / "summary.json", {"config_hash": h, "rows": rows})
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


# --- greedy ------------------------------------------------------------------


def cmd_greedy(args) -> int:
    ctx = pl.load_instance(args.instance)
    result = pl.greedy_cache(ctx, args.capacity)
    body = {
        "capacity": args.capacity,
        "objective": result.objective,
        "items": list(result.order),
        "gains": list(result.gains),
        "evaluations": result.evaluations,
    }
    text = json.dumps(body, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


# --- model -------------------------------------------------------------------


def cmd_model(args) -> int:
    params = mdl.model_from_scalars(args.L, args.qc, args.alpha, args.n)
    value = mdl.chr_closed_form(params)
    bound, kind = mdl.chr_jensen_bound(params)
    body = {
        "list_size": args.L,
        "hit_prob": args.qc,
        "alpha": args.alpha,
        "n": args.n,
        "chr": value,
        "bound": bound,
        "bound_kind": kind,
    }
    if args.mc:
        rng = np.random.default_rng(args.seed)
        body["mc_estimate"] = mdl.chr_monte_carlo(params, args.mc, rng)
        body["mc_sessions"] = args.mc
    print(json.dumps(body, indent=2, sort_keys=True))
    return 0


# --- export-fixtures ---------------------------------------------------------

TOY_RELATED = {
    "v": ("a", "b", "c"),
    "a": ("d", "e"),
    "b": ("c", "f"),
    "c": ("g", "h"),
    "d": (), "e": (), "f": (), "g": (), "h": (),
}


def toy_graph() -> RelationGraph:
    """Nine-item graph small enough to trace by hand; uniform popularity."""
    items = tuple(sorted(TOY_RELATED))
    q = 1.0 / len(items)
    return RelationGraph(
        items=items,
        related_lists={k: tuple(v) for k, v in TOY_RELATED.items()},
        popularity={k: q for k in items},
        region_tag=None,
    )


TOY_CONFIG = """\
seed = 7

[graph]
source = "file"
path = "toy_graph.jsonl"

[cache]
policy = "explicit"
capacity = 3
items = ["e", "g", "z"]

[recommender]
kind = "cache_aware"
n = 4
width = 3
depth = 2

[demand]
initial = "search_bar"
seed_items = ["v"]
position = "uniform"
k = 2
sessions = 100
"""


def cmd_export_fixtures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = toy_graph()
    save_graph(g, out / "toy_graph.jsonl")
    (out / "toy_config.toml").write_text(TOY_CONFIG, encoding="utf-8")
    n = len(g)
    pl.save_instance(
        out / "toy_instance.json",
        "toy_graph.jsonl",
        {"v": 1.0},
        "uniform",
        None,
        4,
        BfsSchedule.classic(3, 2),
    )
    print(f"wrote {out} ({n}-item toy graph, config, instance)")
    return 0


# --- entry -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgerec",
                                description="cache-aware recommendation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run one scenario and write a results bundle")
    sp.add_argument("config")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="grid over the [sweep] section")
    sp.add_argument("config")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare-caching", help="compare cache policies across capacities")
    sp.add_argument("config")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("greedy", help="greedy cache placement for an instance file")
    sp.add_argument("instance")
    sp.add_argument("--capacity", type=int, required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_greedy)

    sp = sub.add_parser("model", help="closed-form hit rate and its mean-count bound")
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--qc", type=float, required=True)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--mc", type=int, default=0,
                    help="also run this many simulated sessions as a check")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_model)

    sp = sub.add_parser("export-fixtures", help="write the toy graph, config, and instance")
    sp.add_argument("--out", default="fixtures")
    sp.set_defaults(func=cmd_export_fixtures)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GraphError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - boundary
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

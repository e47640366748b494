"""Command-line entry point.

    hiraft comm-cost|latency|sensitivity|sig-bench [--config FILE] [--seeds K] [--out DIR] [--no-assert]
    hiraft simulate [--config FILE] [--seed S] [--out DIR]
    hiraft hierarchy [--config FILE] [--rounds R] [--out DIR]

Config files are YAML or JSON.  Top-level keys that name a SimConfig field
become simulation overrides; keys that name an ExperimentSpec field
(``sweep``, ``identity_lengths``, ...) configure the sweep.  A section named
after the experiment kind is merged on top of the shared keys.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import fields
from typing import List, Optional

import yaml

from .errors import ConfigInvalid
from .experiments import KINDS, ExperimentSpec, run_experiment, write_outputs
from .geo import GeoPoint, Region
from .sim import SimConfig, Simulation

log = logging.getLogger("hiraft")

OUT_ENV = "HIRAFT_OUT"
SPEC_KEYS = {"sweep", "identity_lengths", "bench_repeats", "identity_nodes", "jobs"}
SIM_KEYS = {f.name for f in fields(SimConfig)}
HIER_KEYS = {"grid", "fan_in", "threshold", "bind_head", "round_timeout_ms", "warmup_ms"}


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        text = fh.read()
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigInvalid([("<root>", "config must be a mapping")])
    return data


def _section(data: dict, name: str) -> dict:
    merged = {k: v for k, v in data.items() if k not in KINDS and k not in ("simulate", "hierarchy")}
    merged.update(data.get(name) or {})
    return merged


def build_spec(kind: str, data: dict, seeds: Optional[int], out: str, assertions: bool) -> ExperimentSpec:
    cfg = _section(data, kind)
    unknown = set(cfg) - SPEC_KEYS - SIM_KEYS - {"seeds"} - HIER_KEYS
    if unknown:
        raise ConfigInvalid([(k, "unknown key") for k in sorted(unknown)])
    overrides = {k: v for k, v in cfg.items() if k in SIM_KEYS and k != "seed"}
    # validate overrides up front so a typo fails before the sweep starts
    SimConfig.from_dict(overrides)
    seed_list = cfg.get("seeds")
    if seeds is not None:
        seed_list = list(range(seeds))
    elif isinstance(seed_list, int):
        seed_list = list(range(seed_list))
    extra = {k: cfg[k] for k in SPEC_KEYS if k in cfg}
    if seed_list is not None:
        extra["seeds"] = list(seed_list)
    return ExperimentSpec(kind=kind, overrides=overrides, out_dir=out, assertions=assertions, **extra)


def cmd_experiment(args) -> int:
    spec = build_spec(args.command, load_config(args.config), args.seeds, args.out, not args.no_assert)
    if args.jobs:
        spec.jobs = args.jobs
    log.info("running %s over %s with %d seeds", spec.kind, spec.sweep, len(spec.seeds))
    result = run_experiment(spec)
    for path in write_outputs(result, spec.out_dir):
        print(f"wrote {path}")
    for check in result.checks:
        print(check.line())
    return 0 if result.ok else 1


def cmd_simulate(args) -> int:
    cfg = _section(load_config(args.config), "simulate")
    if args.seed is not None:
        cfg["seed"] = args.seed
    config = SimConfig.from_dict(cfg)
    sim = Simulation(config)
    trace, metrics = sim.run()
    os.makedirs(args.out, exist_ok=True)
    key = config.config_hash()
    trace_path = os.path.join(args.out, f"trace-{key}-{config.seed}.jsonl")
    with open(trace_path, "w") as fh:
        fh.write(trace.to_jsonl())
    row = {"config_hash": key, "seed": config.seed, **metrics.as_row()}
    metrics_path = os.path.join(args.out, f"metrics-{key}-{config.seed}.csv")
    with open(metrics_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(row))
        w.writeheader()
        w.writerow(row)
    print(f"wrote {trace_path}")
    print(f"wrote {metrics_path}")
    print(f"committed {metrics.committed_tx}/{metrics.submitted} tx, leader {sim.current_leader()}, "
          f"mean latency {metrics.latency_mean_ms:.3f} ms")
    return 0


def cmd_hierarchy(args) -> int:
    import random

    from .hierarchy import HierarchyConfig, HierarchyCoordinator, NodeRecord, partition

    cfg = _section(load_config(args.config), "hierarchy")
    sim_over = {k: v for k, v in cfg.items() if k in SIM_KEYS and k != "n"}
    hier = {k: v for k, v in cfg.items() if k in HIER_KEYS}
    n = int(cfg.get("n", 40))
    base = HierarchyConfig(**hier, sim=SimConfig.from_dict(dict(sim_over, tx_count=0, duration_ms=1e9)))
    place = random.Random(f"{base.sim.seed}:placement")
    size = base.sim.region_size
    nodes = [NodeRecord(i, GeoPoint(place.uniform(0, size), place.uniform(0, size))) for i in range(n)]
    tree = partition(nodes, base.grid, Region.square(size), base.fan_in, base.threshold, base.sim.m_cap)
    coord = HierarchyCoordinator(tree, base)
    coord.warmup()
    for _ in range(args.rounds):
        coord.global_round()
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "global-rounds.jsonl")
    with open(path, "w") as fh:
        fh.write(coord.trace_jsonl())
    print(f"wrote {path}")
    print(f"{len(tree.leaves())} leaves, {len(tree.middles())} middles; top log has {len(coord.top_log())} entries")
    return 0


def build_parser() -> argparse.ArgumentParser:
    default_out = os.environ.get(OUT_ENV, "out")
    parser = argparse.ArgumentParser(prog="hiraft", description="Location-aware hierarchical consensus experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} sweep")
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--seeds", type=int, help="number of seeds (0..k-1); default 10")
        p.add_argument("--out", default=default_out, help=f"output directory (default ${OUT_ENV} or ./out)")
        p.add_argument("--no-assert", action="store_true", help="skip the built-in curve checks")
        p.add_argument("--jobs", type=int, default=0, help="worker processes for simulation sweeps")
        p.set_defaults(func=cmd_experiment)
    p = sub.add_parser("simulate", help="run one simulation and dump its trace and metrics")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=default_out)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("hierarchy", help="run global rounds over a partitioned network")
    p.add_argument("--config")
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--out", default=default_out)
    p.set_defaults(func=cmd_hierarchy)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        for name, problem in exc.problems:
            print(f"config error: {name}: {problem}", file=sys.stderr)
        return 2
    except (OSError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Parameter sweeps for the four experiment families, with curve-shape checks.

Each runner returns an ``ExperimentResult``: raw per-seed rows, a summary
(mean/min/max per grid cell), a plot-ready series dict and the outcome of
the built-in assertions.  ``write_outputs`` turns that into CSV and JSON.
"""

from __future__ import annotations

import csv
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from .crypto import PHASES, bench_phases, default_suite
from .sim import SimConfig, run

KINDS = ("comm-cost", "latency", "sensitivity", "sig-bench")
MODES = ("proposed", "classical-raft")

DEFAULT_SWEEPS = {
    "comm-cost": [10, 20, 40, 60, 80, 100],
    "latency": [10, 20, 40, 60, 80, 100],
    # candidate cap M at fixed n; c/n runs 1/64 .. 1/2 for n = 128
    "sensitivity": [2, 4, 8, 16, 32, 64],
    "sig-bench": [4, 8, 12, 16, 20],
}

# workload shapes; anything here can be overridden from the config file
BASE_OVERRIDES = {
    # saturating burst on an unconstrained link: bytes, not queueing, are measured
    "comm-cost": dict(m_cap=20, uplink_kbps=0.0, tx_interval_ms=5.0, tx_count=40, duration_ms=1450.0),
    # well-spaced requests, so each latency sample sees an idle leader
    "latency": dict(m_cap=20, tx_interval_ms=200.0, tx_count=10, duration_ms=3200.0),
    "sensitivity": dict(n=128, tx_interval_ms=200.0, tx_count=10, duration_ms=3200.0),
    "sig-bench": {},
}


@dataclass
class ExperimentSpec:
    kind: str
    sweep: List = field(default_factory=list)
    overrides: Dict = field(default_factory=dict)
    out_dir: str = "out"
    seeds: List[int] = field(default_factory=lambda: list(range(10)))
    assertions: bool = True
    # sig-bench only
    identity_lengths: List[int] = field(default_factory=lambda: [6, 64, 1024])
    bench_repeats: int = 3
    identity_nodes: int = 8
    jobs: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if not self.sweep:
            self.sweep = list(DEFAULT_SWEEPS[self.kind])
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if any(b <= a for a, b in zip(self.sweep, self.sweep[1:])):
            raise ValueError(f"sweep values must be strictly increasing: {self.sweep}")

    def base_config(self) -> dict:
        merged = dict(BASE_OVERRIDES[self.kind])
        merged.update(self.overrides)
        merged["record_trace"] = False
        return merged


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass
class ExperimentResult:
    kind: str
    x_name: str
    y_name: str
    rows: List[dict]
    summary: List[dict]
    checks: List[Check]
    # sig-bench: sign/verify means per identity length
    identity_rows: List[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def means(self, mode: str, y: Optional[str] = None) -> Dict:
        y = y or self.y_name
        return {r[self.x_name]: r[f"{y}_mean"] for r in self.summary if r["mode"] == mode}

    def series(self) -> dict:
        out = {"kind": self.kind, "x": self.x_name, "y": self.y_name, "series": []}
        for mode in sorted({r["mode"] for r in self.summary}):
            pts = [r for r in self.summary if r["mode"] == mode]
            out["series"].append({
                "mode": mode,
                "x": [r[self.x_name] for r in pts],
                "y": [r[f"{self.y_name}_mean"] for r in pts],
                "y_min": [r[f"{self.y_name}_min"] for r in pts],
                "y_max": [r[f"{self.y_name}_max"] for r in pts],
            })
        return out


# -- helpers ----------------------------------------------------------------


def _sim_point(args):
    cfg_dict, seed = args
    cfg = SimConfig.from_dict(dict(cfg_dict, seed=seed))
    _, metrics = run(cfg)
    return metrics


def _run_points(points: Sequence, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sim_point, points))
    return [_sim_point(p) for p in points]


def summarize(rows: List[dict], keys: Sequence[str], values: Sequence[str]) -> List[dict]:
    """Mean/min/max of ``values`` per distinct ``keys`` tuple, sorted by key."""
    groups: Dict[tuple, List[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(x) if isinstance(x, str) else x for x in k)):
        g = groups[key]
        rec = dict(zip(keys, key))
        rec["samples"] = len(g)
        for v in values:
            vals = [r[v] for r in g if not _isnan(r[v])]
            rec[f"{v}_mean"] = statistics.fmean(vals) if vals else math.nan
            rec[f"{v}_min"] = min(vals) if vals else math.nan
            rec[f"{v}_max"] = max(vals) if vals else math.nan
        out.append(rec)
    return out


def _isnan(v) -> bool:
    return isinstance(v, float) and math.isnan(v)


def _sorted_rows(rows: List[dict], keys: Sequence[str]) -> List[dict]:
    return sorted(rows, key=lambda r: tuple(r[k] for k in keys))


def strictly_increasing(values: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def non_increasing(values: Sequence[float]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def r_squared(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Coefficient of determination of the least-squares line."""
    if len(xs) < 2 or statistics.pvariance(ys) == 0:
        return 1.0
    return statistics.correlation(xs, ys) ** 2


def _fmt(values) -> str:
    return "[" + ", ".join(f"{v:.3g}" for v in values) + "]"


def _sim_sweep(spec: ExperimentSpec, param: str, extra: Callable[[int], dict] = lambda x: {}) -> List[dict]:
    base = spec.base_config()
    points, keys = [], []
    for mode in MODES:
        for x in spec.sweep:
            cfg = dict(base, mode=mode, **{param: x}, **extra(x))
            if param == "n" and "m_cap" in cfg:
                cfg["m_cap"] = min(cfg["m_cap"], x)
            for seed in spec.seeds:
                points.append((cfg, seed))
                keys.append((mode, x, seed, cfg))
    results = _run_points(points, spec.jobs)
    rows = []
    for (mode, x, seed, cfg), m in zip(keys, results):
        rows.append({
            "mode": mode, param: x, "seed": seed, "n": cfg.get("n", x),
            "m_cap": cfg.get("m_cap", 20),
            "bytes_per_tx": m.bytes_per_tx,
            "agreement_bytes_per_tx": m.agreement_bytes_per_tx,
            "agreement_ms": m.latency_mean_ms,
            "p99_ms": m.latency_p99_ms,
            "committed_tx": m.committed_tx,
            "submitted": m.submitted,
            "total_bytes": m.total_bytes,
            "elections": m.elections,
            "config_hash": SimConfig.from_dict(dict(cfg, seed=seed)).config_hash(),
        })
    return rows


# -- runners ----------------------------------------------------------------


def run_comm_cost(spec: ExperimentSpec) -> ExperimentResult:
    if spec.kind != "comm-cost":
        raise ValueError("spec.kind must be comm-cost")
    rows = _sorted_rows(_sim_sweep(spec, "n"), ("n", "mode", "seed"))
    summary = summarize(rows, ("n", "mode"), ("bytes_per_tx", "agreement_bytes_per_tx"))
    res = ExperimentResult("comm-cost", "n", "bytes_per_tx", rows, summary, [])
    if spec.assertions:
        m_cap = spec.base_config().get("m_cap", 20)
        prop = res.means("proposed", "agreement_bytes_per_tx")
        plateau = [prop[n] for n in spec.sweep if n >= m_cap]
        if len(plateau) >= 2:
            spread = max(plateau) / min(plateau) - 1
            res.checks.append(Check("proposed agreement bytes/tx plateau (n >= M)", spread <= 0.05,
                                    f"spread {spread:.2%} <= 5% over {_fmt(plateau)}"))
        classic = [res.means("classical-raft")[n] for n in spec.sweep]
        res.checks.append(Check("classical bytes/tx strictly increasing", strictly_increasing(classic), _fmt(classic)))
        top = spec.sweep[-1]
        ratio = res.means("classical-raft")[top] / res.means("proposed")[top]
        res.checks.append(Check(f"classical/proposed total bytes/tx at n={top}", ratio >= 4.0, f"{ratio:.2f} >= 4"))
    return res


def run_latency(spec: ExperimentSpec) -> ExperimentResult:
    if spec.kind != "latency":
        raise ValueError("spec.kind must be latency")
    rows = _sorted_rows(_sim_sweep(spec, "n"), ("n", "mode", "seed"))
    summary = summarize(rows, ("n", "mode"), ("agreement_ms",))
    res = ExperimentResult("latency", "n", "agreement_ms", rows, summary, [])
    if spec.assertions:
        m_cap = spec.base_config().get("m_cap", 20)
        prop = res.means("proposed")
        band = [prop[n] for n in spec.sweep if n >= m_cap]
        if len(band) >= 2:
            width = max(band) / min(band)
            res.checks.append(Check("proposed latency flat for n >= M", width <= 1.3,
                                    f"max/min {width:.3f} <= 1.3 over {_fmt(band)}"))
        classic = [res.means("classical-raft")[n] for n in spec.sweep]
        res.checks.append(Check("classical latency strictly increasing", strictly_increasing(classic), _fmt(classic)))
        top = spec.sweep[-1]
        ratio = res.means("classical-raft")[top] / prop[top]
        res.checks.append(Check(f"classical/proposed latency at n={top}", ratio >= 2.0, f"{ratio:.2f} >= 2"))
    return res


def run_sensitivity(spec: ExperimentSpec) -> ExperimentResult:
    if spec.kind != "sensitivity":
        raise ValueError("spec.kind must be sensitivity")
    n = spec.base_config().get("n", 128)
    rows = _sim_sweep(spec, "m_cap")
    for r in rows:
        r["c_over_n"] = r["m_cap"] / n
    rows = _sorted_rows(rows, ("c_over_n", "mode", "seed"))
    summary = summarize(rows, ("c_over_n", "mode"), ("agreement_ms",))
    res = ExperimentResult("sensitivity", "c_over_n", "agreement_ms", rows, summary, [])
    if spec.assertions:
        prop = res.means("proposed")
        ratios = sorted(prop, reverse=True)
        shrinking = [prop[c] for c in ratios]
        res.checks.append(Check("proposed latency non-increasing as c/n shrinks", non_increasing(shrinking),
                                _fmt(shrinking)))
        smallest = ratios[-1]
        gap = res.means("classical-raft")[smallest] / prop[smallest]
        res.checks.append(Check(f"classical/proposed latency at c/n={smallest:.4g}", gap >= 10.0, f"{gap:.2f} >= 10"))
    return res


def run_sig_bench(spec: ExperimentSpec) -> ExperimentResult:
    if spec.kind != "sig-bench":
        raise ValueError("spec.kind must be sig-bench")
    suite = default_suite()
    # untimed warm-up so import and first-call costs do not land on the smallest n
    bench_phases(2, suite, repeats=1, seed=-1)
    rows = []
    for seed in spec.seeds:
        for n in spec.sweep:
            result = bench_phases(n, suite, repeats=spec.bench_repeats, seed=seed)
            for p in PHASES:
                rows.append({"n": n, "phase": p, "seed": seed, "identity_length": 17,
                             "mean_ms": result.mean(p), "total_ms": result.total(p)})
    # lengths are interleaved per seed so a burst of host noise hits all of them alike
    samples: Dict[tuple, List[float]] = {}
    for seed in spec.seeds:
        for length in spec.identity_lengths:
            result = bench_phases(spec.identity_nodes, suite, identity_length=length,
                                  repeats=spec.bench_repeats, seed=seed)
            for p in ("sign", "verify"):
                samples.setdefault((length, p), []).append(result.mean(p))
    ident_rows = [{"identity_length": length, "phase": p, "mean_ms": statistics.fmean(v)}
                  for (length, p), v in sorted(samples.items())]
    rows = _sorted_rows(rows, ("n", "phase", "seed"))
    summary = summarize([dict(r, mode=r["phase"]) for r in rows], ("n", "mode"), ("total_ms", "mean_ms"))
    res = ExperimentResult("sig-bench", "n", "total_ms", rows, summary, [], ident_rows)
    if spec.assertions:
        for p in PHASES:
            totals = res.means(p)
            r2 = r_squared(list(totals), list(totals.values()))
            res.checks.append(Check(f"{p} total time linear in n", r2 >= 0.9, f"R^2 {r2:.4f} >= 0.9"))
        sign_m, verify_m = res.means("sign", "mean_ms"), res.means("verify", "mean_ms")
        slower = all(verify_m[n] > sign_m[n] for n in spec.sweep)
        res.checks.append(Check("verify mean > sign mean at every n", slower,
                                f"verify {_fmt(verify_m.values())} vs sign {_fmt(sign_m.values())}"))
        for p in ("sign", "verify"):
            means = [r["mean_ms"] for r in ident_rows if r["phase"] == p]
            spread = max(means) / min(means) - 1
            res.checks.append(Check(f"{p} time constant in identity length", spread <= 0.2,
                                    f"spread {spread:.2%} <= 20% over lengths {spec.identity_lengths}"))
    return res


RUNNERS = {
    "comm-cost": run_comm_cost,
    "latency": run_latency,
    "sensitivity": run_sensitivity,
    "sig-bench": run_sig_bench,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    return RUNNERS[spec.kind](spec)


def _write_csv(path: str, rows: List[dict]):
    if not rows:
        return
    columns = list(rows[0])
    for r in rows[1:]:
        columns += [k for k in r if k not in columns]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})


def write_outputs(result: ExperimentResult, out_dir: str) -> List[str]:
    """Write ``<kind>.csv``, ``<kind>_summary.csv`` and ``<kind>_series.json``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    raw = os.path.join(out_dir, f"{result.kind}.csv")
    _write_csv(raw, result.rows)
    paths.append(raw)
    summ = os.path.join(out_dir, f"{result.kind}_summary.csv")
    _write_csv(summ, result.summary)
    paths.append(summ)
    if result.identity_rows:
        p = os.path.join(out_dir, f"{result.kind}_identity.csv")
        _write_csv(p, result.identity_rows)
        paths.append(p)
    series = os.path.join(out_dir, f"{result.kind}_series.json")
    with open(series, "w") as fh:
        json.dump(result.series(), fh, indent=2, sort_keys=True)
    paths.append(series)
    checks = os.path.join(out_dir, f"{result.kind}_checks.json")
    with open(checks, "w") as fh:
        json.dump([c.__dict__ for c in result.checks], fh, indent=2)
    paths.append(checks)
    return paths

import csv
import json
import math

import pytest

from hiraft.cli import build_spec, main
from hiraft.errors import ConfigInvalid
from hiraft.experiments import (
    ExperimentSpec,
    non_increasing,
    r_squared,
    run_comm_cost,
    run_experiment,
    run_latency,
    run_sensitivity,
    run_sig_bench,
    strictly_increasing,
    summarize,
    write_outputs,
)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# -- spec ---------------------------------------------------------------------

def test_spec_defaults():
    spec = ExperimentSpec("comm-cost")
    assert spec.sweep == [10, 20, 40, 60, 80, 100]
    assert spec.seeds == list(range(10))
    assert ExperimentSpec("sig-bench").sweep == [4, 8, 12, 16, 20]
    assert ExperimentSpec("sensitivity").sweep == [2, 4, 8, 16, 32, 64]


@pytest.mark.parametrize("kw", [
    dict(kind="throughput"),
    dict(kind="latency", seeds=[]),
    dict(kind="latency", sweep=[20, 10]),
    dict(kind="latency", sweep=[10, 10]),
])
def test_spec_invalid(kw):
    with pytest.raises(ValueError):
        ExperimentSpec(**kw)


def test_runner_kind_guard():
    with pytest.raises(ValueError):
        run_latency(ExperimentSpec("comm-cost", sweep=[2], seeds=[0]))


# -- helpers --------------------------------------------------------------------

def test_shape_helpers():
    assert strictly_increasing([1, 2, 3]) and not strictly_increasing([1, 1, 2])
    assert non_increasing([3, 3, 1]) and not non_increasing([1, 2])
    assert r_squared([1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(1.0)
    assert r_squared([1, 2, 3], [1, 3, 2]) == pytest.approx(0.25)


def test_summarize():
    rows = [{"k": 1, "v": 1.0}, {"k": 1, "v": 3.0}, {"k": 2, "v": math.nan}, {"k": 2, "v": 5.0}]
    out = summarize(rows, ("k",), ("v",))
    assert out[0] == {"k": 1, "samples": 2, "v_mean": 2.0, "v_min": 1.0, "v_max": 3.0}
    assert out[1]["v_mean"] == 5.0


# -- sweeps -----------------------------------------------------------------------

def test_comm_cost_small(tmp_path):
    spec = ExperimentSpec("comm-cost", sweep=[10, 20, 40], seeds=[0, 1], out_dir=str(tmp_path))
    res = run_comm_cost(spec)
    assert len(res.rows) == 3 * 2 * 2
    prop = res.means("proposed")
    classic = res.means("classical-raft")
    assert classic[40] > 1.5 * prop[40]
    paths = write_outputs(res, str(tmp_path))
    raw = read_csv(tmp_path / "comm-cost.csv")
    cells = [(r["n"], r["mode"], r["seed"]) for r in raw]
    assert len(cells) == len(set(cells)) == 12
    summary = read_csv(tmp_path / "comm-cost_summary.csv")
    grid = [(r["n"], r["mode"]) for r in summary]
    assert sorted(grid) == sorted((str(n), m) for n in (10, 20, 40) for m in ("proposed", "classical-raft"))
    series = json.loads((tmp_path / "comm-cost_series.json").read_text())
    assert {s["mode"] for s in series["series"]} == {"proposed", "classical-raft"}
    assert all(s["x"] == [10, 20, 40] for s in series["series"])
    assert len(paths) == 4


def test_single_node_costs_equal():
    spec = ExperimentSpec("comm-cost", sweep=[1], seeds=[0], assertions=False)
    res = run_comm_cost(spec)
    assert res.means("proposed")[1] == res.means("classical-raft")[1]


def test_rows_reproducible():
    spec = ExperimentSpec("latency", sweep=[10, 20], seeds=[3], assertions=False)
    a = run_latency(spec).rows
    b = run_latency(spec).rows
    assert a == b
    assert all(r["committed_tx"] > 0 for r in a)


def test_parallel_matches_serial():
    spec = ExperimentSpec("latency", sweep=[10, 20], seeds=[0, 1], assertions=False)
    serial = run_latency(spec).rows
    spec.jobs = 2
    assert run_latency(spec).rows == serial


def test_sensitivity_small():
    spec = ExperimentSpec("sensitivity", sweep=[4, 16], seeds=[0], overrides={"n": 32}, assertions=True)
    res = run_sensitivity(spec)
    assert sorted(res.means("proposed")) == [4 / 32, 16 / 32]
    names = [c.name for c in res.checks]
    assert any("non-increasing" in n for n in names)
    classic = res.means("classical-raft")
    # the baseline ignores the cap
    assert classic[4 / 32] == pytest.approx(classic[16 / 32], rel=0.25)


def test_sig_bench_small():
    spec = ExperimentSpec("sig-bench", sweep=[2, 4], seeds=[0], identity_lengths=[6, 64],
                          identity_nodes=2, bench_repeats=1)
    res = run_sig_bench(spec)
    assert {r["phase"] for r in res.rows} == {"keygen", "sign", "verify"}
    assert len(res.rows) == 2 * 3
    assert len(res.identity_rows) == 2 * 2
    assert all(r["total_ms"] > 0 for r in res.rows)


# -- CLI ---------------------------------------------------------------------------

def test_cli_experiment_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("latency:\n  sweep: [10, 20]\n  tx_count: 4\n")
    code = main(["latency", "--config", str(cfg), "--seeds", "1", "--out", str(tmp_path / "o"), "--no-assert"])
    assert code == 0
    assert (tmp_path / "o" / "latency.csv").exists()
    assert "wrote" in capsys.readouterr().out


def test_cli_failing_check_exit_code(tmp_path, capsys):
    # no cap at all: proposed bytes grow with n, so the plateau check fails
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"comm-cost": {"sweep": [20, 40], "m_cap": 100}}))
    code = main(["comm-cost", "--config", str(cfg), "--seeds", "1", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 1
    assert "[FAIL]" in out


def test_cli_passing_checks_exit_zero(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("sweep: [20, 40, 60]\nm_cap: 10\n")
    code = main(["comm-cost", "--config", str(cfg), "--seeds", "1", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0, out
    assert "[FAIL]" not in out and "[PASS]" in out


def test_cli_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("nodes: 5\n")
    assert main(["latency", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "nodes" in capsys.readouterr().err


def test_cli_bad_value(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("drop_prob: 3\n")
    assert main(["latency", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_build_spec_sections():
    data = {"tx_count": 5, "seeds": 3, "latency": {"sweep": [10, 30], "drop_prob": 0.1}, "comm-cost": {"n": 9}}
    spec = build_spec("latency", data, None, "x", True)
    assert spec.sweep == [10, 30]
    assert spec.seeds == [0, 1, 2]
    assert spec.overrides == {"tx_count": 5, "drop_prob": 0.1}
    assert build_spec("latency", data, 2, "x", True).seeds == [0, 1]
    with pytest.raises(ConfigInvalid):
        build_spec("latency", {"bogus": 1}, None, "x", True)


def test_cli_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("HIRAFT_OUT", str(tmp_path / "env"))
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("n: 4\nduration_ms: 1500\n")
    assert main(["simulate", "--config", str(cfg), "--seed", "2"]) == 0
    files = sorted(p.name for p in (tmp_path / "env").iterdir())
    assert len(files) == 2
    assert files[0].startswith("metrics-") and files[0].endswith("-2.csv")
    assert files[1].startswith("trace-") and files[1].endswith("-2.jsonl")
    (row,) = read_csv(tmp_path / "env" / files[0])
    assert row["seed"] == "2" and int(row["committed_tx"]) > 0


def test_cli_hierarchy(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("hierarchy:\n  n: 24\n  grid: 2\n")
    assert main(["hierarchy", "--config", str(cfg), "--rounds", "2", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "global-rounds.jsonl").read_text().splitlines()
    events = [json.loads(x)["event"] for x in lines]
    assert "global_commit" in events


def test_run_experiment_dispatch():
    res = run_experiment(ExperimentSpec("latency", sweep=[5], seeds=[0], assertions=False))
    assert res.kind == "latency" and res.checks == []

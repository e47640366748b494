"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (shown in the terminal summary)
and then asserts on the same outcome.
"""

import itertools
import random
import time
from dataclasses import replace

import pytest

from hiraft.crypto import (
    OneTimeSignature,
    SigningKey,
    ThresholdPolicy,
    corrupt,
    generate_keypair,
    hash_identity,
    sign,
    verify_single,
    verify_threshold,
)
from hiraft.errors import NoLeader
from hiraft.experiments import ExperimentSpec, run_experiment
from hiraft.geo import GeoPoint
from hiraft.hierarchy import LEAF, HierarchyConfig, HierarchyCoordinator, NodeRecord, partition
from hiraft.sim import FaultSpec, SimConfig, Simulation

import invariants as inv

pytestmark = pytest.mark.slow


def _experiment(kind, criterion, number, title, budget_s):
    t0 = time.perf_counter()
    result = run_experiment(ExperimentSpec(kind))
    elapsed = time.perf_counter() - t0
    failed = [c.line() for c in result.checks if not c.passed]
    passed = result.ok and bool(result.checks) and elapsed < budget_s
    detail = "; ".join(c.line() for c in result.checks) + f"; {elapsed:.0f}s < {budget_s}s"
    criterion(number, title, passed, detail)
    assert result.checks
    assert not failed, failed
    assert elapsed < budget_s


def test_threshold_exhaustive(suite, criterion):
    t0 = time.perf_counter()
    rng = random.Random(1)
    mismatches = 0
    cases = 0
    for n in range(1, 7):
        keys = [generate_keypair(suite, f"acc1|{n}|{i}") for i in range(n)]
        digests = [hash_identity(suite, f"node-{n}-{i}") for i in range(n)]
        good = [sign(sk, d) for (sk, _), d in zip(keys, digests)]
        bad = [corrupt(s, rng) for s in good]
        for mask in itertools.product((True, False), repeat=n):
            slots = [(good[i] if ok else bad[i], digests[i], keys[i][1]) for i, ok in enumerate(mask)]
            expected_valid = sum(mask)
            for t in range(1, n + 1):
                report = verify_threshold(slots, ThresholdPolicy(t, n))
                cases += 1
                if report.valid != expected_valid or report.accepted != (expected_valid >= t):
                    mismatches += 1
    # the 2-of-3 and 1-of-3 illustrations
    keys = [generate_keypair(suite, f"acc1|ex|{i}") for i in range(3)]
    digests = [hash_identity(suite, f"ex-{i}") for i in range(3)]
    sigs = [sign(sk, d) for (sk, _), d in zip(keys, digests)]
    two = [(sigs[0], digests[0], keys[0][1]), (sigs[1], digests[1], keys[1][1]), (None, digests[2], keys[2][1])]
    one = [two[0], (corrupt(sigs[1], rng), digests[1], keys[1][1]), two[2]]
    examples = (verify_threshold(two, ThresholdPolicy(2, 3)).accepted
                and verify_threshold(one, ThresholdPolicy(1, 3)).accepted
                and not verify_threshold(one, ThresholdPolicy(2, 3)).accepted)
    elapsed = time.perf_counter() - t0
    passed = mismatches == 0 and examples and elapsed < 60
    criterion(1, "threshold semantics match brute-force counting", passed,
              f"{mismatches} mismatches over {cases} cases, examples {'ok' if examples else 'wrong'}, {elapsed:.1f}s")
    assert mismatches == 0 and examples and elapsed < 60


def test_pairing_correctness(suite, criterion):
    t0 = time.perf_counter()
    rng = random.Random(2)
    g = suite.generator()
    bilinear = 0
    for _ in range(50):
        h = suite.random_g1(rng)
        a = suite.random_scalar(rng)
        bilinear += suite.pair(suite.g1_mul(h, a), g) == suite.pair(h, suite.g2_mul(g, a))
    roundtrip = 0
    for i in range(50):
        sk, vk = generate_keypair(suite, f"acc2|{i}")
        d = hash_identity(suite, rng.randbytes(rng.randint(1, 64)))
        roundtrip += verify_single(sign(sk, d), d, vk)
    sk, vk = generate_keypair(suite, "acc2|victim")
    d = hash_identity(suite, "victim")
    forged = 0
    for i in range(1000):
        if i % 2:
            fake = OneTimeSignature(suite.encode_g1(suite.random_g1(rng)), "forger", suite)
        else:
            fake = sign(SigningKey(suite.random_scalar(rng), suite), d)
        forged += verify_single(fake, d, vk)
    elapsed = time.perf_counter() - t0
    passed = bilinear == 50 and roundtrip == 50 and forged == 0 and elapsed < 60
    criterion(2, "pairing bilinearity, round-trips, forgery rejection", passed,
              f"bilinear {bilinear}/50, round-trips {roundtrip}/50, forgeries accepted {forged}/1000, {elapsed:.1f}s")
    assert passed


def test_election_safety(criterion):
    t0 = time.perf_counter()
    rng = random.Random(3)
    bad = []
    for k in range(200):
        n = rng.randint(5, 100)
        drop = (0.0, 0.05, 0.2)[k % 3]
        faults = [FaultSpec(rng.choice(["leader", rng.randrange(n)]), rng.uniform(200, 2200),
                            rng.choice(["crash", "drift"]))
                  for _ in range(rng.randint(1, 3))]
        cfg = SimConfig(seed=k, n=n, m_cap=min(20, n), drop_prob=drop, faults=faults,
                        mode=rng.choice(["proposed", "classical-raft"]),
                        tx_interval_ms=50, tx_count=20, duration_ms=2500)
        trace, _ = Simulation(cfg).run()
        if inv.two_leader_terms(trace):
            bad.append((k, inv.two_leader_terms(trace)))
    elapsed = time.perf_counter() - t0
    passed = not bad and elapsed < 600
    criterion(3, "at most one leader per (sub-chain, term)", passed,
              f"{len(bad)} of 200 traces with two leaders in a term, {elapsed:.0f}s")
    assert not bad, bad[:3]
    assert elapsed < 600


def test_comm_cost_plateau(criterion):
    _experiment("comm-cost", criterion, 4, "communication-cost plateau and growth", 300)


def test_latency_shape(criterion):
    _experiment("latency", criterion, 5, "latency band and growth", 300)


def test_sensitivity(criterion):
    _experiment("sensitivity", criterion, 6, "latency sensitivity to c/n", 300)


def test_signature_benchmarks(criterion):
    _experiment("sig-bench", criterion, 7, "signature phase timings", 120)


def _gate_campaign(seed):
    """Five faulted global rounds on a random network; returns (gate violations, fork delays)."""
    kinds = ["fork", "crash", "corrupt-signature", "drift", "corrupt-many"]
    rng = random.Random(seed)
    nodes = [NodeRecord(i, GeoPoint(rng.uniform(0, 1000), rng.uniform(0, 1000)))
             for i in range(rng.choice([12, 24, 40]))]
    tree = partition(nodes, 2, m_cap=20)
    cfg = HierarchyConfig()
    cfg.sim = replace(cfg.sim, seed=seed)
    hc = HierarchyCoordinator(tree, cfg)
    hc.warmup()
    rng.shuffle(kinds)
    for kind in kinds:
        leaf = rng.choice(tree.layers[LEAF])
        try:
            if kind == "corrupt-many":
                members = tree.chains[leaf].members
                for nid in members[: len(members) // 2]:
                    hc.sims[leaf].inject_fault(nid, "corrupt-signature")
            elif kind in ("fork", "crash"):
                hc.inject(leaf, "leader", kind)
            else:
                hc.inject(leaf, rng.choice(tree.chains[leaf].members), kind)
        except NoLeader:
            pass
        hc.global_round()
    hc.settle(600)
    violations = 0
    for entries in hc.parent_entries.values():
        for e in entries:
            cp = e.get("checkpoint")
            if cp is None:
                continue
            valid = sum(1 for sig, d, vk in cp.slots if sig is not None and verify_single(sig, d, vk))
            floor = ThresholdPolicy.two_thirds(len(cp.slots)).t
            if valid < e["t"] or e["t"] < floor or len(cp.slots) != e["n"]:
                violations += 1
    delays = []
    for sim in hc.sims.values():
        records = sim.trace.records
        for rec in records:
            if rec["ev"] != "fork_emitted":
                continue
            later = [x for x in records if x["node"] == rec["node"] and x["ev"] == "role" and x["t"] >= rec["t"]]
            ok = later and later[0]["from"] == "Leader"
            delays.append((later[0]["t"] - rec["t"]) / 1000.0 if ok else None)
    return violations, delays


def test_hierarchy_gate(criterion):
    t0 = time.perf_counter()
    violations, delays = 0, []
    for seed in range(10):
        v, d = _gate_campaign(seed)
        violations += v
        delays += d
    elapsed = time.perf_counter() - t0
    period_ms = 300.0
    slow = [d for d in delays if d is None or d > period_ms]
    worst = max((d for d in delays if d is not None), default=0.0)
    passed = violations == 0 and delays and not slow and elapsed < 300
    criterion(8, "threshold gate and fork demotion over 50 faulted rounds", passed,
              f"{violations} under-threshold parent entries, {len(delays)} forks, worst demotion {worst:.1f} ms"
              f" <= {period_ms:.0f} ms, {elapsed:.0f}s")
    assert violations == 0
    assert delays and not slow, delays
    assert elapsed < 300


def test_determinism(criterion):
    t0 = time.perf_counter()
    rng = random.Random(9)
    differing = []
    for k in range(20):
        n = rng.choice([3, 5, 10, 25, 50])
        faults = [FaultSpec("leader", 1200, rng.choice(["crash", "drift", "fork", "corrupt-signature"]))]
        cfg = dict(seed=rng.randrange(10**6), n=n, m_cap=rng.choice([3, 20]),
                   drop_prob=rng.choice([0.0, 0.05, 0.2]), mode=rng.choice(["proposed", "classical-raft"]),
                   faults=faults, duration_ms=2000)
        outs = []
        for _ in range(2):
            trace, metrics = Simulation(SimConfig(**cfg)).run()
            outs.append((trace.to_jsonl(), repr(sorted(metrics.as_row().items()))))
        if outs[0] != outs[1]:
            differing.append(k)
    elapsed = time.perf_counter() - t0
    passed = not differing and elapsed < 120
    criterion(9, "replays are byte-identical", passed, f"{len(differing)} of 20 pairs differ, {elapsed:.1f}s")
    assert not differing
    assert elapsed < 120

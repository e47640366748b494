"""Trace-level safety checks shared by the simulator and acceptance tests."""

from collections import defaultdict


def two_leader_terms(trace):
    """(term, leaders) pairs where more than one node led the same term."""
    return {term: ids for term, ids in trace.leaders_by_term().items() if len(ids) > 1}


def double_votes(trace):
    seen = defaultdict(set)
    bad = []
    for r in trace.of("vote"):
        cand, term = r["info"]
        seen[(r["node"], term)].add(cand)
        if len(seen[(r["node"], term)]) > 1:
            bad.append((r["node"], term))
    return bad


def term_regressions(trace):
    last = {}
    bad = []
    for r in trace:
        if r["ev"] not in ("role", "timeout", "election") or not isinstance(r["node"], int):
            continue
        term = r.get("term")
        if term is None:
            continue
        if term < last.get(r["node"], 0):
            bad.append(r)
        last[r["node"]] = term
    return bad


def oversized_groups(trace, m_cap):
    bad = []
    fanout = defaultdict(set)
    for r in trace.of("deliver"):
        msg = r["msg"]
        if msg["type"] == "GroupAnnounce" and len(msg["members"]) > m_cap:
            bad.append(r)
        if msg["type"] == "AppendEntry":
            fanout[(msg["src"], msg["term"])].add(msg["dst"])
    bad += [k for k, dsts in fanout.items() if len(dsts) > m_cap - 1]
    return bad


def log_mismatches(sim):
    """Pairs of live nodes whose logs share an (index, term) but differ before it."""
    logs = {nid: node.log for nid, node in sim.nodes.items()}
    bad = []
    ids = sorted(logs)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            la, lb = logs[a], logs[b]
            for k in range(min(len(la), len(lb)) - 1, -1, -1):
                if la[k].term == lb[k].term:
                    if la[: k + 1] != lb[: k + 1]:
                        bad.append((a, b, k + 1))
                    break
    return bad


def commit_conflicts(sim):
    return {idx: d for idx, d in sim.committed_at.items() if len(d) > 1}


def phantom_deliveries(trace):
    crashed_at = {}
    bad = []
    for r in trace:
        if r["ev"] == "fault" and r["kind"] == "crash":
            crashed_at.setdefault(r["node"], r["t"])
        elif r["ev"] == "deliver" and r["node"] in crashed_at:
            bad.append(r)
    return bad


def time_regressions(trace):
    times = [r["t"] for r in trace]
    return [i for i in range(1, len(times)) if times[i] < times[i - 1]]

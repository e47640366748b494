"""Deterministic discrete-event network simulator.

Time is kept in integer microseconds.  Events sit in a heap ordered by
``(time, seq)`` where ``seq`` is the insertion counter, so simultaneous
events resolve by insertion order and a replay with the same seed is
identical.

Network model: each node has one uplink that serializes its outgoing
messages (two priority levels, non-preemptive; follower notifications go
in the low class).  A message leaves when its transmission finishes, is
dropped with the configured Bernoulli probability, and otherwise arrives
after an affine-in-distance propagation delay plus uniform jitter.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import random
import statistics
from collections import Counter, deque
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import ConfigInvalid, UnknownNode
from .geo import (
    GeoPoint,
    RepEvent,
    Reputation,
    check_weights,
    distance,
    drift_exceeded,
    update_reputation,
)
from .messages import ClientRequest, Message, SizeTable, describe, is_agreement
from .node import Mode, Node, ProtocolParams, Role

FAULT_KINDS = ("crash", "drift", "corrupt-signature", "fork")
_LOW_PRIORITY = {"Notification"}


def latency_of(sender: GeoPoint, receiver: GeoPoint, rng: random.Random,
               base_ms: float = 0.2, per_km_ms: float = 0.5, jitter_ms: float = 0.1) -> float:
    """One-way delay in ms: ``base + per_km * km + U(0, jitter)``, never zero."""
    ms = base_ms + per_km_ms * distance(sender, receiver) / 1000.0
    if jitter_ms > 0:
        ms += rng.uniform(0.0, jitter_ms)
    return max(ms, 1e-3)


def _us(ms: float) -> int:
    return int(round(ms * 1000))


@dataclass
class FaultSpec:
    """``node`` may be an id or ``"leader"`` (whoever leads at that moment)."""

    node: Union[int, str]
    time_ms: float
    kind: str

    @classmethod
    def from_dict(cls, data) -> "FaultSpec":
        if isinstance(data, FaultSpec):
            return data
        return cls(node=data["node"], time_ms=float(data["time_ms"]), kind=data["kind"])


@dataclass
class SimConfig:
    seed: int = 0
    n: int = 5
    m_cap: int = 20
    region_size: float = 1000.0
    # latency model
    base_ms: float = 0.2
    per_km_ms: float = 0.5
    jitter_ms: float = 0.1
    uplink_kbps: float = 4000.0  # 0 = unlimited
    drop_prob: float = 0.0
    faults: List[FaultSpec] = field(default_factory=list)
    mode: str = "proposed"
    sizes: SizeTable = field(default_factory=SizeTable)
    duration_ms: float = 3000.0
    # client workload
    tx_start_ms: float = 1000.0
    tx_interval_ms: float = 20.0
    tx_count: int = 20
    # protocol
    election_timeout_ms: Tuple[float, float] = (150.0, 300.0)
    heartbeat_ms: float = 50.0
    block_interval_ms: float = 100.0
    notify_per_tx: bool = False
    follower_timeout_factor: float = 3.0
    form_window_ms: float = 20.0
    cgf_weights: Tuple[float, float] = (0.5, 0.5)
    neighborhood_radius: Optional[float] = None
    selection_ratio: float = 1.0
    term_stride: int = 100
    # geo-drift audit
    drift_check_ms: float = 300.0
    drift_window_checks: int = 10
    drift_threshold: float = 0.1  # fraction of region size
    record_trace: bool = True

    def __post_init__(self):
        self.faults = [FaultSpec.from_dict(f) for f in self.faults]

    def validate(self) -> "SimConfig":
        bad = []

        def need(cond, name, msg):
            if not cond:
                bad.append((name, msg))

        need(isinstance(self.n, int) and self.n >= 1, "n", "must be an integer >= 1")
        need(isinstance(self.m_cap, int) and self.m_cap >= 1, "m_cap", "must be an integer >= 1")
        need(0.0 <= self.drop_prob <= 1.0, "drop_prob", "must be in [0, 1]")
        need(self.region_size > 0, "region_size", "must be positive")
        for name in ("base_ms", "per_km_ms", "jitter_ms", "uplink_kbps"):
            need(getattr(self, name) >= 0, name, "must be non-negative")
        need(self.duration_ms > 0, "duration_ms", "must be positive")
        need(self.mode in (m.value for m in Mode), "mode", f"must be one of {[m.value for m in Mode]}")
        lo, hi = self.election_timeout_ms
        need(0 < lo <= hi, "election_timeout_ms", "need 0 < low <= high")
        need(self.heartbeat_ms > 0, "heartbeat_ms", "must be positive")
        need(self.block_interval_ms > 0, "block_interval_ms", "must be positive")
        need(self.form_window_ms > 0, "form_window_ms", "must be positive")
        need(self.follower_timeout_factor >= 1, "follower_timeout_factor", "must be >= 1")
        need(0 < self.selection_ratio <= 1, "selection_ratio", "must be in (0, 1]")
        need(isinstance(self.term_stride, int) and self.term_stride >= 2, "term_stride", "must be an integer >= 2")
        need(self.tx_count >= 0, "tx_count", "must be non-negative")
        need(self.tx_interval_ms > 0, "tx_interval_ms", "must be positive")
        need(self.drift_check_ms > 0, "drift_check_ms", "must be positive")
        need(self.drift_window_checks >= 1, "drift_window_checks", "must be >= 1")
        need(self.drift_threshold > 0, "drift_threshold", "must be positive")
        try:
            check_weights(self.cgf_weights)
        except ValueError as exc:
            bad.append(("cgf_weights", str(exc)))
        for i, f in enumerate(self.faults):
            if f.kind not in FAULT_KINDS:
                bad.append((f"faults[{i}].kind", f"must be one of {FAULT_KINDS}"))
            if not (f.node == "leader" or (isinstance(f.node, int) and 0 <= f.node < self.n)):
                bad.append((f"faults[{i}].node", "must be a node id in [0, n) or 'leader'"))
            if not 0 <= f.time_ms <= self.duration_ms:
                bad.append((f"faults[{i}].time_ms", "must lie within the run"))
        if bad:
            raise ConfigInvalid(bad)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["election_timeout_ms"] = list(self.election_timeout_ms)
        d["cgf_weights"] = list(self.cgf_weights)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid([(k, "unknown key") for k in sorted(unknown)])
        data = dict(data)
        if "faults" in data:
            data["faults"] = [FaultSpec.from_dict(f) for f in data["faults"]]
        if isinstance(data.get("sizes"), dict):
            try:
                data["sizes"] = SizeTable.from_dict(data["sizes"])
            except (KeyError, TypeError) as exc:
                raise ConfigInvalid([("sizes", str(exc))]) from None
        for key in ("election_timeout_ms", "cgf_weights"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def protocol_params(self) -> ProtocolParams:
        lo, hi = self.election_timeout_ms
        return ProtocolParams(
            mode=Mode(self.mode),
            m_cap=self.m_cap,
            election_timeout_us=(_us(lo), _us(hi)),
            heartbeat_us=_us(self.heartbeat_ms),
            follower_timeout_factor=self.follower_timeout_factor,
            form_window_us=_us(self.form_window_ms),
            block_interval_us=_us(self.block_interval_ms),
            notify_per_tx=self.notify_per_tx,
            cgf_weights=tuple(self.cgf_weights),
            d_max=self.region_size,
            neighborhood_radius=self.neighborhood_radius,
            selection_ratio=self.selection_ratio,
            term_stride=self.term_stride,
        )


class SimTrace:
    """Append-only list of trace records (plain dicts)."""

    def __init__(self, chain: str = "chain-0"):
        self.chain = chain
        self.records: List[dict] = []

    def add(self, t: int, node, ev: str, **details):
        rec = {"t": t, "node": node, "ev": ev}
        rec.update(details)
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def of(self, ev: str) -> List[dict]:
        return [r for r in self.records if r["ev"] == ev]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    def leaders_by_term(self) -> Dict[int, set]:
        out: Dict[int, set] = {}
        for r in self.records:
            if r["ev"] == "role" and r["to"] == "Leader":
                out.setdefault(r["term"], set()).add(r["node"])
        return out


@dataclass
class MetricsReport:
    total_bytes: int = 0
    bytes_by_kind: Dict[str, int] = field(default_factory=dict)
    messages_by_kind: Dict[str, int] = field(default_factory=dict)
    submitted: int = 0
    committed_tx: int = 0
    # bytes delivered from the first client submission to the end of the run
    window_bytes: int = 0
    bytes_per_tx: float = math.nan
    agreement_bytes: int = 0
    agreement_bytes_per_tx: float = math.nan
    latency_mean_ms: float = math.nan
    latency_p50_ms: float = math.nan
    latency_p99_ms: float = math.nan
    elections: int = 0
    formations: int = 0
    leader_changes: int = 0

    def as_row(self) -> dict:
        row = asdict(self)
        row.pop("bytes_by_kind")
        row.pop("messages_by_kind")
        for k, v in sorted(self.bytes_by_kind.items()):
            row[f"bytes_{k}"] = v
        return row


def _percentile(values: Sequence[float], q: float) -> float:
    """Linear-interpolated percentile, ``q`` in [0, 100]."""
    if not values:
        return math.nan
    if len(values) == 1:
        return float(values[0])
    cuts = statistics.quantiles(values, n=100, method="inclusive")
    if q <= 0:
        return float(min(values))
    if q >= 100:
        return float(max(values))
    return cuts[int(q) - 1]


class Simulation:
    """One sub-chain's nodes plus the network that connects them."""

    def __init__(
        self,
        config: SimConfig,
        chain: str = "chain-0",
        node_ids: Optional[Sequence[int]] = None,
        locations: Optional[Dict[int, GeoPoint]] = None,
        reputations: Optional[Dict[int, Reputation]] = None,
    ):
        config.validate()
        self.config = config
        self.chain = chain
        self.params = config.protocol_params()
        seed = config.seed
        self.net_rng = random.Random(f"{seed}:{chain}:net")
        self.aux_rng = random.Random(f"{seed}:{chain}:aux")
        ids = list(range(config.n)) if node_ids is None else list(node_ids)
        if locations is None:
            place = random.Random(f"{seed}:{chain}:place")
            s = config.region_size
            locations = {i: GeoPoint(place.uniform(0, s), place.uniform(0, s)) for i in ids}
        reputations = reputations or {}
        self.nodes: Dict[int, Node] = {
            i: Node(
                i,
                ids,
                locations[i],
                self.params,
                random.Random(f"{seed}:{chain}:{i}"),
                reputations.get(i, Reputation(0.5)),
            )
            for i in ids
        }
        self.now = 0
        self._queue: list = []
        self._seq = 0
        self._sched: Dict[Tuple[int, str], int] = {}
        self.crashed: set = set()
        self.corrupt_signers: set = set()
        self._uplink: Dict[int, Tuple[deque, deque]] = {i: (deque(), deque()) for i in ids}
        self._busy: Dict[int, bool] = {i: False for i in ids}
        self.trace = SimTrace(chain)
        self._record = config.record_trace
        # metrics accumulators
        self._bytes = Counter()
        self._msgs = Counter()
        self._window_bytes = 0
        self._agreement_bytes = 0
        self._first_submit: Optional[int] = None
        self._submit_time: Dict[str, int] = {}
        self._commit_time: Dict[str, int] = {}
        # index -> digests any leader ever committed there (safety: one each)
        self.committed_at: Dict[int, set] = {}
        self._elections = 0
        self._formations = 0
        self._leaders_seen: set = set()
        self._penalized: set = set()
        self.client: Optional[int] = None
        self.commit_listeners = []

        for i in ids:
            self._sync_timers(i)
        for k, f in enumerate(config.faults):
            self._push(_us(f.time_ms), "fault", f)
        if config.tx_count:
            self._push(_us(config.tx_start_ms), "workload", 0)
        self._push(_us(config.drift_check_ms), "geo", None)

    # -- queue ------------------------------------------------------------------

    def _push(self, t: int, kind: str, payload):
        if t < self.now:
            raise AssertionError("event scheduled in the past")
        self._seq += 1
        heapq.heappush(self._queue, (t, self._seq, kind, payload))

    def _log(self, node, ev: str, **details):
        if self._record:
            self.trace.add(self.now, node, ev, **details)

    def _sync_timers(self, nid: int):
        node = self.nodes[nid]
        for kind, deadline in node.timers.items():
            key = (nid, kind)
            if self._sched.get(key) != deadline:
                self._sched[key] = deadline
                self._push(deadline, "timer", (nid, kind, deadline))

    # -- network ----------------------------------------------------------------

    def _send(self, msg: Message):
        src = msg.src
        if src in self.crashed:
            return
        if self.config.uplink_kbps <= 0:
            self._depart(msg)
            return
        high, low = self._uplink[src]
        (low if msg.kind in _LOW_PRIORITY else high).append(msg)
        if not self._busy[src]:
            self._start_tx(src)

    def _start_tx(self, nid: int):
        high, low = self._uplink[nid]
        queue = high if high else low
        if not queue:
            self._busy[nid] = False
            return
        msg = queue.popleft()
        self._busy[nid] = True
        bits = self.config.sizes.size_of(msg) * 8
        dur = max(1, int(math.ceil(bits * 1000.0 / self.config.uplink_kbps)))
        self._push(self.now + dur, "tx_done", msg)

    def _depart(self, msg: Message):
        if self.config.drop_prob > 0 and self.net_rng.random() < self.config.drop_prob:
            return
        c = self.config
        ms = latency_of(self.nodes[msg.src].location, self.nodes[msg.dst].location, self.net_rng,
                        c.base_ms, c.per_km_ms, c.jitter_ms)
        self._push(self.now + max(1, _us(ms)), "deliver", msg)

    def _emit(self, nid: int, msgs: List[Message]):
        for m in msgs:
            self._send(m)
        self._drain_notes(nid)
        self._sync_timers(nid)

    # -- event handlers -----------------------------------------------------------

    def step(self) -> bool:
        if not self._queue:
            return False
        t, seq, kind, payload = heapq.heappop(self._queue)
        self.now = t
        getattr(self, "_ev_" + kind.replace("-", "_"))(payload)
        return True

    def run_until(self, t_us: int):
        while self._queue and self._queue[0][0] <= t_us:
            self.step()
        self.now = max(self.now, t_us)

    def run(self) -> Tuple[SimTrace, MetricsReport]:
        self.run_until(_us(self.config.duration_ms))
        return self.trace, self.metrics()

    def _ev_timer(self, payload):
        nid, kind, deadline = payload
        node = self.nodes[nid]
        if nid in self.crashed or node.timers.get(kind) != deadline:
            return
        if self._sched.get((nid, kind)) == deadline:
            del self._sched[(nid, kind)]
        if kind in ("election", "form"):
            self._log(nid, "timeout", kind=kind, term=node.term)
        self._emit(nid, node.on_timeout(kind, self.now))

    def _ev_tx_done(self, msg: Message):
        src = msg.src
        if src in self.crashed:
            return
        self._depart(msg)
        self._start_tx(src)

    def _ev_deliver(self, msg: Message):
        dst = msg.dst
        if dst in self.crashed:
            return
        size = self.config.sizes.size_of(msg)
        self._bytes[msg.kind] += size
        self._msgs[msg.kind] += 1
        if self._first_submit is not None:
            self._window_bytes += size
            if is_agreement(msg):
                self._agreement_bytes += size
        if self._record:
            self.trace.add(self.now, dst, "deliver", size=size, msg=describe(msg))
        self._emit(dst, self.nodes[dst].handle(msg, self.now))

    def _ev_fault(self, f: FaultSpec):
        nid = self.current_leader() if f.node == "leader" else f.node
        if nid is None:
            self._log(None, "fault_skipped", kind=f.kind, reason="no leader")
            return
        self.inject_fault(nid, f.kind)

    def _ev_workload(self, i: int):
        c = self.config
        if self.client is None:
            self.client = self._pick_client()
        digest = hashlib.sha256(f"{self.chain}:tx:{i}".encode()).hexdigest()
        if self._first_submit is None:
            self._first_submit = self.now
        self._submit_time[digest] = self.now
        self._log(self.client, "submit", digest=digest[:12])
        self._client_send(digest)
        if i + 1 < c.tx_count:
            self._push(self.now + _us(c.tx_interval_ms), "workload", i + 1)

    def _ev_retry(self, digest: str):
        if digest not in self._commit_time:
            self._client_send(digest)

    def _ev_geo(self, _):
        c = self.config
        period = _us(c.drift_check_ms)
        window = period * c.drift_window_checks
        threshold = c.drift_threshold * c.region_size
        reports = []
        for nid, node in self.nodes.items():
            node.history.record(self.now, node.location)
            reports.append((nid, drift_exceeded(node.history, window, threshold, self.now)))
        flagged = [nid for nid, d in reports if d]
        if flagged:
            self._log(None, "drift_check", flagged=flagged)
        for nid, node in self.nodes.items():
            if nid not in self.crashed:
                self._emit(nid, node.evict_drifted(reports, self.now))
        self._push(self.now + period, "geo", None)

    def _ev_submit(self, digest: str):
        if self._first_submit is None:
            self._first_submit = self.now
        self._submit_time.setdefault(digest, self.now)
        self._client_send(digest)

    # -- clients ----------------------------------------------------------------

    def _pick_client(self) -> int:
        pool = [i for i, n in self.nodes.items() if i not in self.crashed and n.role is not Role.LEADER]
        pool = pool or [i for i in self.nodes if i not in self.crashed] or list(self.nodes)
        return self.aux_rng.choice(sorted(pool))

    def _client_send(self, digest: str):
        client = self.client
        if client is None or client in self.crashed:
            client = self.client = self._pick_client()
        node = self.nodes[client]
        if node.role is Role.LEADER:
            self._emit(client, node.replicate(digest, self.now))
        elif node.leader_id is not None and node.leader_id not in self.crashed:
            self._send(ClientRequest(client, node.leader_id, node.term, digest=digest))
            # resend if the leader never commits it
            self._push(self.now + self.params.election_timeout_us[1], "retry", digest)
        else:
            self._push(self.now + _us(5), "retry", digest)

    def submit(self, digest: str, at_us: Optional[int] = None):
        """Queue a client transaction (used by the hierarchy coordinator)."""
        self._push(self.now if at_us is None else max(self.now, at_us), "submit", digest)

    def commit_time(self, digest: str) -> Optional[int]:
        return self._commit_time.get(digest)

    def run_until_committed(self, digest: str, deadline_us: int) -> Optional[int]:
        """Step until ``digest`` commits at a leader or ``deadline_us`` passes."""
        while digest not in self._commit_time and self._queue and self._queue[0][0] <= deadline_us:
            self.step()
        if digest not in self._commit_time:
            self.run_until(deadline_us)
        return self._commit_time.get(digest)

    def regroup(self) -> Optional[int]:
        """Order the current leader to step down and re-form the candidate group."""
        nid = self.current_leader()
        if nid is None:
            return None
        self._log(nid, "regroup_ordered", term=self.nodes[nid].term)
        self._emit(nid, self.nodes[nid].regroup(self.now))
        return nid

    # -- faults -----------------------------------------------------------------

    def inject_fault(self, nid: int, kind: str):
        if nid not in self.nodes:
            raise UnknownNode(nid)
        if kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {kind!r}")
        node = self.nodes[nid]
        detail = {}
        if kind == "crash":
            self.crashed.add(nid)
            high, low = self._uplink[nid]
            high.clear()
            low.clear()
        elif kind == "drift":
            node.location = self._drifted_location(node.location)
            detail = {"x": round(node.location.x, 3), "y": round(node.location.y, 3)}
        elif kind == "corrupt-signature":
            self.corrupt_signers.add(nid)
        elif kind == "fork":
            node.fork_armed = True
        self._log(nid, "fault", kind=kind, role=node.role.value, term=node.term, **detail)

    def _drifted_location(self, p: GeoPoint) -> GeoPoint:
        # jump 1.5x the drift threshold toward the farthest corner (stays in region)
        s = self.config.region_size
        step = 1.5 * self.config.drift_threshold * s
        corner = GeoPoint(0.0 if p.x > s / 2 else s, 0.0 if p.y > s / 2 else s)
        d = distance(p, corner)
        return GeoPoint(p.x + (corner.x - p.x) * step / d, p.y + (corner.y - p.y) * step / d)

    def schedule_fault(self, nid, kind: str, at_us: int):
        if nid != "leader" and nid not in self.nodes:
            raise UnknownNode(nid)
        self._push(at_us, "fault", FaultSpec(nid, at_us / 1000.0, kind))

    # -- bookkeeping ------------------------------------------------------------------

    def _drain_notes(self, nid: int):
        node = self.nodes[nid]
        if not node.notes:
            return
        notes, node.notes = node.notes, []
        for note in notes:
            kind = note[0]
            if kind == "role":
                _, old, new, term = note
                self._log(nid, "role", to=new, term=term, **{"from": old})
                if new == "Leader" and (nid, term) not in self._leaders_seen:
                    self._leaders_seen.add((nid, term))
            elif kind == "commit":
                _, entries, acked = note
                for idx, digest in entries:
                    self.committed_at.setdefault(idx, set()).add(digest)
                    if digest not in self._commit_time:
                        self._commit_time[digest] = self.now
                    for fn in self.commit_listeners:
                        fn(nid, idx, digest, self.now)
                self._log(nid, "commit", term=node.term, indices=[e[0] for e in entries], acked=len(acked))
                for v in [nid] + list(acked):
                    self.adjust_reputation(v, RepEvent.PARTICIPATED_OK)
            elif kind == "election_started":
                self._elections += 1
                self._log(nid, "election", term=note[1])
            elif kind == "formation_started":
                self._formations += 1
                self._log(nid, "formation", epoch=note[1], attempt=note[2])
            elif kind == "fork_detected":
                _, leader, term = note
                self._log(nid, "fork_detected", leader=leader, term=term)
                if ("fork", leader, term) not in self._penalized:
                    self._penalized.add(("fork", leader, term))
                    self.adjust_reputation(leader, RepEvent.MISBEHAVED)
            elif kind == "leader_timeout":
                _, leader, term = note
                if ("timeout", leader, term) not in self._penalized:
                    self._penalized.add(("timeout", leader, term))
                    self.adjust_reputation(leader, RepEvent.TIMED_OUT)
            else:
                self._log(nid, kind, info=list(note[1:]))

    def adjust_reputation(self, nid: int, event: RepEvent):
        node = self.nodes.get(nid)
        if node is not None:
            node.reputation = update_reputation(node.reputation, event)

    def current_leader(self) -> Optional[int]:
        best = None
        for nid, node in self.nodes.items():
            if nid in self.crashed or node.role is not Role.LEADER:
                continue
            if best is None or node.term > self.nodes[best].term:
                best = nid
        return best

    def live_nodes(self) -> List[int]:
        return [i for i in self.nodes if i not in self.crashed]

    def metrics(self) -> MetricsReport:
        lat = [
            (self._commit_time[d] - t0) / 1000.0
            for d, t0 in sorted(self._submit_time.items())
            if d in self._commit_time
        ]
        committed = len(lat)
        m = MetricsReport(
            total_bytes=sum(self._bytes.values()),
            bytes_by_kind=dict(sorted(self._bytes.items())),
            messages_by_kind=dict(sorted(self._msgs.items())),
            submitted=len(self._submit_time),
            committed_tx=committed,
            window_bytes=self._window_bytes,
            agreement_bytes=self._agreement_bytes,
            elections=self._elections,
            formations=self._formations,
            leader_changes=len(self._leaders_seen),
        )
        if committed:
            m.bytes_per_tx = self._window_bytes / committed
            m.agreement_bytes_per_tx = self._agreement_bytes / committed
            m.latency_mean_ms = statistics.fmean(lat)
            m.latency_p50_ms = statistics.median(lat)
            m.latency_p99_ms = _percentile(lat, 99)
        return m


def run(config: SimConfig) -> Tuple[SimTrace, MetricsReport]:
    """Run one simulation to ``config.duration_ms``."""
    return Simulation(config).run()

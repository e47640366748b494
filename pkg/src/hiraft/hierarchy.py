"""Leaf / middle / top hierarchy of sub-chains joined by threshold checkpoints.

Leaves are cut from the global region by grid cell; every group of
``fan_in`` leaves sits under one middle chain and all middles sit under a
single top chain.  A middle chain's consensus nodes are seats, one per
child leaf, held by whichever node currently leads that leaf.  Every
chain runs its own consensus simulation; the coordinator moves
checkpoints upward and only lets an entry into a parent log when the
child's (t, n) threshold check passes.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .crypto import (
    IdentityDigest,
    OneTimeSignature,
    PairingSuite,
    SigningKey,
    ThresholdPolicy,
    VerificationReport,
    VerifierKey,
    corrupt,
    default_suite,
    generate_keypair,
    hash_identity,
    sign,
    verify_threshold,
)
from .errors import NoLeader, NotMyChild
from .geo import GeoPoint, RepEvent, Region, Reputation, decode_csc, encode_csc
from .sim import SimConfig, Simulation

LEAF, MIDDLE, TOP = "leaf", "middle", "top"


@dataclass(frozen=True)
class NodeRecord:
    node_id: int
    location: GeoPoint
    reputation: float = 0.5


@dataclass
class SubChain:
    chain_id: str
    layer: str
    region: Region
    members: List[int]
    policy: ThresholdPolicy
    leader: Optional[int] = None
    head: Tuple[int, str] = (0, "")
    parent: Optional[str] = None
    children: List[str] = field(default_factory=list)
    # also the top chain (single-leaf tree)
    is_top: bool = False


@dataclass
class LayerTree:
    chains: Dict[str, SubChain]
    layers: Dict[str, List[str]]
    top: str
    records: Dict[int, NodeRecord] = field(default_factory=dict)

    def leaves(self) -> List[SubChain]:
        return [self.chains[c] for c in self.layers[LEAF]]

    def middles(self) -> List[SubChain]:
        return [self.chains[c] for c in self.layers[MIDDLE]]

    def parent_of(self, chain_id: str) -> Optional[SubChain]:
        p = self.chains[chain_id].parent
        return self.chains[p] if p else None


def default_policy(n: int, threshold: Optional[int] = None) -> ThresholdPolicy:
    """Two-thirds-plus-one unless a fixed ``threshold`` is configured (clamped to n)."""
    if threshold is None:
        return ThresholdPolicy.two_thirds(n)
    return ThresholdPolicy(max(1, min(threshold, n)), n)


def _bbox(regions: Sequence[Region]) -> Region:
    return Region(min(r.x0 for r in regions), min(r.y0 for r in regions),
                  max(r.x1 for r in regions), max(r.y1 for r in regions))


def partition(
    nodes: Sequence[NodeRecord],
    grid: int,
    region: Region = Region(),
    fan_in: int = 4,
    threshold: Optional[int] = None,
    m_cap: Optional[int] = None,
) -> LayerTree:
    """Assign nodes to leaf chains by grid cell and stack middles and a top above them.

    ``m_cap`` bounds the consensus-node count (policy n) of a leaf.
    """
    if not nodes:
        raise ValueError("need at least one node")
    if grid < 1:
        raise ValueError("grid must be >= 1")
    if fan_in < 1:
        raise ValueError("fan_in must be >= 1")
    cells: Dict[str, List[int]] = {}
    for rec in nodes:
        cells.setdefault(encode_csc(rec.location, grid, region), []).append(rec.node_id)
    chains: Dict[str, SubChain] = {}
    leaf_ids = []
    for code in sorted(cells):
        members = sorted(cells[code])
        cid = f"leaf-{code}"
        n = len(members) if m_cap is None else min(len(members), m_cap)
        chains[cid] = SubChain(cid, LEAF, decode_csc(code, grid, region), members, default_policy(n, threshold))
        leaf_ids.append(cid)
    records = {rec.node_id: rec for rec in nodes}
    if len(leaf_ids) == 1:
        chains[leaf_ids[0]].is_top = True
        return LayerTree(chains, {LEAF: leaf_ids, MIDDLE: [], TOP: [leaf_ids[0]]}, leaf_ids[0], records)
    middle_ids = []
    for i in range(0, len(leaf_ids), fan_in):
        kids = leaf_ids[i:i + fan_in]
        cid = f"middle-{i // fan_in}"
        chains[cid] = SubChain(cid, MIDDLE, _bbox([chains[k].region for k in kids]), list(range(len(kids))),
                               default_policy(len(kids), threshold), children=kids)
        for k in kids:
            chains[k].parent = cid
        middle_ids.append(cid)
    chains["top"] = SubChain("top", TOP, region, list(range(len(middle_ids))),
                             default_policy(len(middle_ids), threshold), children=middle_ids, is_top=True)
    for m in middle_ids:
        chains[m].parent = "top"
    return LayerTree(chains, {LEAF: leaf_ids, MIDDLE: middle_ids, TOP: ["top"]}, "top", records)


@dataclass
class Checkpoint:
    child: str
    head: Tuple[int, str]
    # one (signature or None, identity digest, verifier key) slot per consensus node
    slots: List[Tuple[Optional[OneTimeSignature], IdentityDigest, VerifierKey]]
    submitted_ms: float
    signers: List[int] = field(default_factory=list)
    # (leaf chain, leaf index, leaf digest) this checkpoint ultimately vouches for
    origin: Optional[Tuple[str, int, str]] = None


@dataclass
class HierarchyConfig:
    grid: int = 2
    fan_in: int = 4
    threshold: Optional[int] = None
    # sign identity || block digest instead of the bare identity
    bind_head: bool = False
    round_timeout_ms: float = 1500.0
    warmup_ms: float = 1500.0
    # policy n follows the size of each chain's formed candidate group
    track_group: bool = True
    sim: SimConfig = field(default_factory=lambda: SimConfig(tx_count=0, duration_ms=10**9))


def checkpoint_digest(chain: str, index: int, digest: str) -> str:
    return hashlib.sha256(f"cp|{chain}|{index}|{digest}".encode()).hexdigest()


class HierarchyCoordinator:
    """Drives every sub-chain and moves checkpoints leaf -> middle -> top."""

    def __init__(self, tree: LayerTree, config: Optional[HierarchyConfig] = None,
                 suite: Optional[PairingSuite] = None):
        self.tree = tree
        self.config = config or HierarchyConfig()
        self.suite = suite or default_suite()
        self.rng = random.Random(f"{self.config.sim.seed}:hierarchy")
        self.sims: Dict[str, Simulation] = {}
        for cid, chain in tree.chains.items():
            if chain.layer == LEAF:
                locs = {i: tree.records[i].location for i in chain.members}
                reps = {i: Reputation(tree.records[i].reputation) for i in chain.members}
            else:
                kids = [tree.chains[k] for k in chain.children]
                locs = {i: kids[i].region.center for i in chain.members}
                reps = None
            cfg = replace(self.config.sim, n=len(chain.members), tx_count=0,
                          m_cap=min(self.config.sim.m_cap, len(chain.members)), faults=[])
            self.sims[cid] = Simulation(cfg, chain=cid, node_ids=chain.members, locations=locs, reputations=reps)
        # trusted issuer: one key pair per (chain, consensus node)
        self.keys: Dict[Tuple[str, int], Tuple[SigningKey, VerifierKey]] = {}
        for cid, chain in tree.chains.items():
            for i in chain.members:
                self.keys[(cid, i)] = generate_keypair(self.suite, f"{self.config.sim.seed}|{cid}|{i}")
        self._identity_cache: Dict[Tuple[str, int], IdentityDigest] = {}
        self.trace: List[dict] = []
        # parent log entries with the leaf entry each one vouches for
        self.parent_entries: Dict[str, List[dict]] = {cid: [] for cid in tree.chains}
        self.rounds = 0
        self._pending: Dict[str, List[Tuple[int, str]]] = {}
        self._sync_leaders()

    # -- helpers -----------------------------------------------------------

    def _event(self, chain: str, event: str, digest: str = "", **extra):
        rec = {"t": round(self.sims[chain].now / 1000.0, 3), "layer": self.tree.chains[chain].layer, "chain": chain,
               "event": event, "digest": digest[:16]}
        rec.update(extra)
        self.trace.append(rec)

    def _sync_leaders(self):
        for cid, sim in self.sims.items():
            self.tree.chains[cid].leader = sim.current_leader()

    def consensus_nodes(self, chain_id: str) -> List[int]:
        """The nodes whose signatures make up ``chain_id``'s checkpoints."""
        chain = self.tree.chains[chain_id]
        sim = self.sims[chain_id]
        leader = sim.current_leader()
        group: Sequence[int] = ()
        if leader is not None and sim.params.mode.value == "proposed":
            group = sim.nodes[leader].group_formed
        nodes = sorted(group) if group else sorted(chain.members)
        return nodes[: chain.policy.n]

    def _track_policy(self, chain: SubChain, size: int):
        # the consensus nodes are the leader's formed group; n follows its size
        if size and size != chain.policy.n:
            old = chain.policy
            chain.policy = default_policy(size, self.config.threshold)
            self._event(chain.chain_id, "policy_update", old=[old.t, old.n], new=[chain.policy.t, chain.policy.n])

    def _identity(self, chain: str, node: int, head: Tuple[int, str]) -> IdentityDigest:
        ident = f"{chain}/{node}"
        if self.config.bind_head:
            return hash_identity(self.suite, ident, head[1].encode())
        key = (chain, node)
        if key not in self._identity_cache:
            self._identity_cache[key] = hash_identity(self.suite, ident)
        return self._identity_cache[key]

    def warmup(self):
        t = int(self.config.warmup_ms * 1000)
        for sim in self.sims.values():
            sim.run_until(max(sim.now, t))
        self._sync_leaders()

    def inject(self, chain_id: str, node, kind: str):
        """Apply a fault now; ``node`` may be ``"leader"``."""
        sim = self.sims[chain_id]
        nid = sim.current_leader() if node == "leader" else node
        if nid is None:
            raise NoLeader(chain_id)
        sim.inject_fault(nid, kind)
        self._event(chain_id, "fault", kind=kind, node=nid)
        return nid

    # -- checkpoint flow ---------------------------------------------------------

    def submit_checkpoint(self, child_id: str, origin: Optional[Tuple[str, int, str]] = None) -> Checkpoint:
        """Collect one-time signatures from the child's consensus nodes."""
        chain = self.tree.chains[child_id]
        sim = self.sims[child_id]
        leader = sim.current_leader()
        chain.leader = leader
        if leader is None:
            raise NoLeader(f"{child_id} has no elected leader")
        node = sim.nodes[leader]
        if node.commit_index == 0:
            raise NoLeader(f"{child_id} has no committed ledger head")
        head_entry = node.log[node.commit_index - 1]
        head = (head_entry.index, head_entry.digest)
        chain.head = head
        signers = self.consensus_nodes(child_id)
        if self.config.track_group:
            self._track_policy(chain, len(signers))
        slots = []
        for i in range(chain.policy.n):
            nid = signers[i] if i < len(signers) else None
            if nid is None:
                # fewer consensus nodes than the policy expects: empty slot
                ghost = chain.members[i % len(chain.members)]
                slots.append((None, self._identity(child_id, ghost, head), self.keys[(child_id, ghost)][1]))
                continue
            sk, vk = self.keys[(child_id, nid)]
            digest = self._identity(child_id, nid, head)
            if nid in sim.crashed:
                sig = None
            else:
                sig = sign(sk, digest, signer=f"{child_id}/{nid}")
                if nid in sim.corrupt_signers:
                    sig = corrupt(sig, self.rng)
            slots.append((sig, digest, vk))
        cp = Checkpoint(child_id, head, slots, sim.now / 1000.0, signers=list(signers), origin=origin)
        self._event(child_id, "checkpoint_submitted", head[1], index=head[0])
        return cp

    def accept_checkpoint(self, parent_id: str, cp: Checkpoint, policy: Optional[ThresholdPolicy] = None):
        """Threshold-check ``cp``; on success append it to the parent's log.

        Returns ``(accepted, report)``.  ``policy`` overrides the child's
        configured policy (dynamic threshold switch).
        """
        parent = self.tree.chains[parent_id]
        if cp.child not in parent.children:
            raise NotMyChild(f"{cp.child} is not a child of {parent_id}")
        child = self.tree.chains[cp.child]
        policy = policy or child.policy
        report = verify_threshold(cp.slots, policy)
        extra = {"valid": report.valid, "threshold": policy.t, "signers": policy.n}
        if not report.accepted:
            self._event(parent_id, "checkpoint_rejected", cp.head[1], child=cp.child, **extra)
            return False, report
        origin = cp.origin or (cp.child, cp.head[0], cp.head[1])
        digest = checkpoint_digest(*origin)
        sim = self.sims[parent_id]
        start = max(sim.now, int(cp.submitted_ms * 1000))
        sim.submit(digest, start)
        deadline = start + int(self.config.round_timeout_ms * 1000)
        done = sim.run_until_committed(digest, deadline)
        self._event(parent_id, "checkpoint_accepted", digest, child=cp.child, **extra)
        if done is None:
            self._event(parent_id, "parent_commit_timeout", digest)
            return False, report
        leader = sim.current_leader()
        index = next((e.index for e in sim.nodes[leader].log if e.digest == digest), None) if leader is not None else None
        self.parent_entries[parent_id].append({
            "digest": digest, "index": index, "origin": origin, "child": cp.child,
            "valid": report.valid, "t": policy.t, "n": policy.n, "checkpoint": cp,
        })
        self._event(parent_id, "parent_commit", digest, index=index)
        return True, report

    def _penalize(self, child_id: str, cp: Checkpoint, report: VerificationReport):
        sim = self.sims[child_id]
        for nid, ok in zip(cp.signers, report.results):
            if ok:
                continue
            event = RepEvent.TIMED_OUT if nid in sim.crashed else RepEvent.MISBEHAVED
            sim.adjust_reputation(nid, event)

    # -- rounds ------------------------------------------------------------------

    def _local_commit(self, chain_id: str, label: str) -> Optional[Tuple[int, str]]:
        sim = self.sims[chain_id]
        digest = hashlib.sha256(f"{chain_id}|{label}".encode()).hexdigest()
        sim.submit(digest)
        deadline = sim.now + int(self.config.round_timeout_ms * 1000)
        if sim.run_until_committed(digest, deadline) is None:
            return None
        leader = sim.current_leader()
        if leader is None:
            return None
        for e in sim.nodes[leader].log:
            if e.digest == digest:
                self._event(chain_id, "local_commit", digest, index=e.index)
                return (e.index, e.digest)
        return None

    def settle(self, ms: float):
        """Advance every sub-chain by ``ms`` without new client work."""
        target = max(s.now for s in self.sims.values()) + int(ms * 1000)
        for sim in self.sims.values():
            sim.run_until(target)
        self._sync_leaders()

    def _align_clocks(self):
        now = max(s.now for s in self.sims.values())
        for sim in self.sims.values():
            sim.run_until(now)

    def global_round(self) -> List[dict]:
        """One leaf -> middle -> top pass; returns this round's trace records."""
        start = len(self.trace)
        self.rounds += 1
        r = self.rounds
        tree = self.tree
        self._event(tree.top, "round_start", round=r)
        for leaf in tree.leaves():
            head = self._local_commit(leaf.chain_id, f"tx{r}")
            if head is not None:
                self._pending.setdefault(leaf.chain_id, []).append(head)
        if tree.chains[tree.top].layer == LEAF:
            # single-leaf tree: the local commit is the global commit
            for head in self._pending.pop(tree.top, []):
                self.parent_entries[tree.top].append({
                    "digest": head[1], "index": head[0], "origin": (tree.top, head[0], head[1]),
                    "child": tree.top,
                })
                self._event(tree.top, "global_commit", head[1], index=head[0])
            self._align_clocks()
            self._sync_leaders()
            return self.trace[start:]

        for leaf in tree.leaves():
            cid = leaf.chain_id
            if not self._pending.get(cid):
                continue
            cp = self._checkpoint_or_none(cid)
            if cp is None:
                continue
            accepted, report = self.accept_checkpoint(leaf.parent, cp)
            if not accepted:
                self._after_reject(cid, cp, report)
                continue
            # the signed head covers every older pending entry of this leaf
            self._pending.pop(cid, None)
            origin = (cid, cp.head[0], cp.head[1])
            mid_cp = self._checkpoint_or_none(leaf.parent, origin=origin)
            if mid_cp is None:
                continue
            accepted, report = self.accept_checkpoint(tree.top, mid_cp)
            if accepted:
                self._event(tree.top, "global_commit", checkpoint_digest(*origin))
            else:
                self._after_reject(leaf.parent, mid_cp, report)
        self._align_clocks()
        self._sync_leaders()
        return self.trace[start:]

    def _checkpoint_or_none(self, chain_id: str, origin=None) -> Optional[Checkpoint]:
        try:
            return self.submit_checkpoint(chain_id, origin=origin)
        except NoLeader:
            self._event(chain_id, "no_leader")
            return None

    def _after_reject(self, chain_id: str, cp: Checkpoint, report: VerificationReport):
        if report.valid >= report.policy.t:
            # verified but the parent could not commit in time; just retry
            return
        self._penalize(chain_id, cp, report)
        led = self.sims[chain_id].regroup()
        self._event(chain_id, "regroup", node=led)

    # -- views ----------------------------------------------------------------------

    def top_log(self) -> List[dict]:
        return list(self.parent_entries[self.tree.top])

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.trace)

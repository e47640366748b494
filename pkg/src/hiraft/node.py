"""Per-node replicated state machine.

Two modes share one message interface:

* ``proposed``: a follower that loses contact with the leader collects CGF
  scores from the sub-chain, picks the top-M scorers as the candidate
  group and announces it; group members elect a leader among themselves
  and run log agreement inside the group.  Committed entries reach the
  remaining followers through batched notifications.
* ``classical-raft``: plain Raft over all n nodes.

Each handler consumes one event, mutates the node and returns the messages
to send.  Timers are expressed as absolute deadlines in ``self.timers``;
the simulator owns the event queue.  Noteworthy transitions are appended
to ``self.notes`` for the simulator to trace.

Candidate-group formation is a two-step, majority-quorum affair.  A
FormGroup proposes a formation epoch and every responder promises not to
answer an older or competing proposal for that epoch, so at most one group
exists per epoch.  Each epoch owns a block of ``term_stride`` consecutive
terms for its internal elections, which keeps elections of concurrently
existing groups apart.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import NoResponses, NotLeader
from .geo import CgfScore, GeoPoint, LocationHistory, Reputation, cgf_score, check_weights, distance
from .messages import (
    Ack,
    AppendEntry,
    CgfResponse,
    ClientRequest,
    ForkEvidence,
    FormGroup,
    GroupAnnounce,
    LeaderAnnounce,
    LogEntry,
    Message,
    Notification,
    Vote,
    VoteRequest,
)


class Role(str, Enum):
    FOLLOWER = "Follower"
    CANDIDATE = "Candidate"
    LEADER = "Leader"


class Mode(str, Enum):
    PROPOSED = "proposed"
    CLASSICAL = "classical-raft"


@dataclass
class ProtocolParams:
    """Protocol knobs; all durations in integer microseconds."""

    mode: Mode = Mode.PROPOSED
    m_cap: int = 20
    election_timeout_us: tuple = (150_000, 300_000)
    heartbeat_us: int = 50_000
    # non-candidate followers wait this much longer before regrouping
    follower_timeout_factor: float = 3.0
    form_window_us: int = 20_000
    max_backoff: int = 8
    block_interval_us: int = 100_000
    notify_per_tx: bool = False
    cgf_weights: tuple = (0.5, 0.5)
    d_max: float = 1000.0
    neighborhood_radius: Optional[float] = None
    # fraction of eligible responders admitted before the M cap applies
    selection_ratio: float = 1.0
    term_stride: int = 100

    def __post_init__(self):
        self.mode = Mode(self.mode)
        check_weights(self.cgf_weights)


def select_candidates(responses: Sequence[CgfScore], m_cap: int) -> List[int]:
    """Top ``m_cap`` node ids by combined score; ties go to the lower id."""
    if not responses:
        raise NoResponses("no CGF responses to select from")
    if m_cap < 1:
        raise ValueError("m_cap must be >= 1")
    ranked = sorted(responses, key=lambda s: (-s.combined, s.node_id))
    return [s.node_id for s in ranked[:m_cap]]


def fork_digest(digest: str) -> str:
    return hashlib.sha256(b"fork:" + digest.encode()).hexdigest()


_NEVER = -(10**18)


class Node:
    def __init__(
        self,
        node_id: int,
        peers: Iterable[int],
        location: GeoPoint,
        params: Optional[ProtocolParams] = None,
        rng: Optional[random.Random] = None,
        reputation: Reputation = Reputation(0.5),
        history_capacity: int = 32,
        now: int = 0,
    ):
        self.id = node_id
        self.peers = sorted(p for p in peers if p != node_id)
        self.n = len(self.peers) + 1
        self.location = location
        self.params = params or ProtocolParams()
        self.rng = rng or random.Random(node_id)
        self.reputation = reputation
        self.history = LocationHistory(history_capacity)

        self.role = Role.FOLLOWER
        self.term = 0
        self.voted_for: Optional[int] = None
        self.log: List[LogEntry] = []
        self.commit_index = 0
        self.leader_id: Optional[int] = None
        self.last_leader_contact = _NEVER
        self.last_group_time = _NEVER

        # candidate group view
        self.group: Optional[frozenset] = None
        self.group_epoch: Optional[int] = None
        self.group_size = 0
        self.group_formed: tuple = ()
        self.floor = (0, 0)
        self.ineligible_timeouts = 0
        self.promise: Optional[tuple] = None  # (epoch, initiator)
        self.promise_time = _NEVER
        self.drifted = False
        self.distrusted: set = set()

        # formation, initiator side
        self.forming: Optional[int] = None
        self.form_anchor: Optional[GeoPoint] = None
        self.responses: dict = {}
        self.backoff = 1
        self.restarts = 0
        self.reform = False

        self.votes: set = set()

        # leader bookkeeping
        self.next_index: dict = {}
        self.match_index: dict = {}
        self.last_sent: dict = {}
        self.notified_upto = 0
        self.last_notify = _NEVER

        self.fork_armed = False
        self.timers: dict = {}
        self.notes: list = []
        self._arm_election(now)

    # -- helpers -----------------------------------------------------------

    @property
    def proposed(self) -> bool:
        return self.params.mode is Mode.PROPOSED

    def __repr__(self):
        return f"Node({self.id}, {self.role.value}, term={self.term})"

    def last_log_term(self) -> int:
        return self.log[-1].term if self.log else 0

    def in_group(self) -> bool:
        return self.group is not None and self.id in self.group

    def _set_role(self, role: Role):
        if role is not self.role:
            self.notes.append(("role", self.role.value, role.value, self.term))
            self.role = role

    def _election_delay(self) -> int:
        lo, hi = self.params.election_timeout_us
        delay = self.rng.randint(lo, hi)
        if self.proposed and self.group is not None and not self.in_group():
            delay = int(delay * self.params.follower_timeout_factor)
        return delay

    def _arm_election(self, now: int, delay: Optional[int] = None):
        self.timers["election"] = now + (self._election_delay() if delay is None else delay)

    def _leader_alive(self, now: int) -> bool:
        return self.leader_id is not None and now - self.last_leader_contact < self.params.election_timeout_us[0]

    def _majority(self) -> int:
        # members caught equivocating are out of the voter base for good
        if self.proposed:
            base = self.group_size - len(self.distrusted.intersection(self.group_formed))
        else:
            base = self.n - len(self.distrusted)
        return max(base, 1) // 2 + 1

    def _voters(self) -> set:
        if self.proposed:
            return set(self.group or ())
        return set(self.peers) | {self.id}

    def _targets(self) -> List[int]:
        if self.proposed:
            return sorted((self.group or frozenset()) - {self.id})
        return list(self.peers)

    def _own_score(self, anchor: GeoPoint) -> CgfScore:
        p = self.params
        return cgf_score(
            self.reputation,
            self.location,
            anchor,
            p.d_max,
            p.cgf_weights,
            node_id=self.id,
            geo_override=0.0 if self.drifted else None,
        )

    def _leave_group(self):
        if self.group is not None:
            self.notes.append(("left_group", self.group_epoch))
        self.group = None
        self.group_epoch = None
        self.group_size = 0
        self.group_formed = ()
        self.floor = (0, 0)

    def _observe_term(self, term: int, now: int) -> bool:
        if term <= self.term:
            return False
        was = self.role
        self.term = term
        self.voted_for = None
        self.leader_id = None
        if was is Role.LEADER:
            self.notes.append(("stepped_down", term))
        if was is not Role.FOLLOWER:
            self._set_role(Role.FOLLOWER)
            self._arm_election(now)
        self.timers.pop("heartbeat", None)
        self.timers.pop("block", None)
        if self.proposed and self.group is not None and term >= self.group_epoch + self.params.term_stride:
            self._leave_group()
        return True

    # -- dispatch ------------------------------------------------------------

    def handle(self, msg: Message, now: int) -> List[Message]:
        handler = getattr(self, "_on_" + msg.kind)
        return handler(msg, now)

    def on_timeout(self, kind: str, now: int) -> List[Message]:
        """A timer of the given kind fired at ``now``."""
        self.timers.pop(kind, None)
        if kind == "election":
            if self.role is Role.LEADER:
                return []
            if self.leader_id is not None:
                self.notes.append(("leader_timeout", self.leader_id, self.term))
            if not self.proposed:
                return self._campaign(now)
            if self.in_group() and not self.drifted:
                return self._campaign(now)
            if self.role is Role.CANDIDATE:
                self._set_role(Role.FOLLOWER)
            return self.start_election(now)
        if kind == "form":
            return self._finish_formation(now)
        if kind == "heartbeat":
            return self._heartbeat(now)
        if kind == "block":
            return self._block_tick(now)
        raise ValueError(f"unknown timer {kind!r}")

    # -- candidate group formation ------------------------------------------

    def start_election(self, now: int, reform: bool = False) -> List[Message]:
        """A follower proposes a new candidate group to the sub-chain."""
        if self.role is not Role.FOLLOWER:
            return []
        if not self.proposed:
            return self._campaign(now)
        self.reform = self.reform or reform
        stride = self.params.term_stride
        floor = max(self.term, self.promise[0] if self.promise else 0, self.group_epoch or 0)
        epoch = (floor // stride + 1) * stride
        self.forming = epoch
        self.form_anchor = self.location
        self.promise = (epoch, self.id)
        self.promise_time = now
        self.responses = {
            self.id: (self._own_score(self.location), self.location, self._log_head(), self.group_epoch,
                      self.group_formed, self.drifted)
        }
        self.notes.append(("formation_started", epoch, self.restarts))
        self.timers.pop("election", None)
        self.timers["form"] = now + self.params.form_window_us
        out: List[Message] = [
            FormGroup(self.id, p, epoch, anchor=self.location, reform=self.reform) for p in self.peers
        ]
        if not self.peers:
            out += self._finish_formation(now)
        return out

    def on_form_group(self, msg: FormGroup, now: int) -> List[Message]:
        """Answer a formation request with this node's CGF score, or ignore it."""
        if msg.src == self.id or not self.proposed:
            return []
        if msg.term <= self.term or (self.group_epoch is not None and msg.term <= self.group_epoch):
            return []
        if self.promise is not None:
            epoch, initiator = self.promise
            if msg.term < epoch or (msg.term == epoch and initiator != msg.src):
                return []
        if not msg.reform and (
            self.role is Role.LEADER
            or self._leader_alive(now)
            or now - self.last_group_time < self.params.election_timeout_us[0]
        ):
            return []
        if self.forming is not None and msg.term > self.forming:
            self._abort_formation()
        self.promise = (msg.term, msg.src)
        self.promise_time = now
        if self.role is not Role.LEADER:
            self._arm_election(now)
        last_index, last_term = len(self.log), self.last_log_term()
        return [
            CgfResponse(self.id, msg.src, msg.term, score=self._own_score(msg.anchor), location=self.location,
                        last_log_index=last_index, last_log_term=last_term, group_epoch=self.group_epoch,
                        members=self.group_formed, drifted=self.drifted)
        ]

    _on_FormGroup = on_form_group

    def _log_head(self) -> tuple:
        return (self.last_log_term(), len(self.log))

    def _fenced(self, term: int, now: int) -> bool:
        # a fresh promise to a newer formation blocks older leaders for one lease
        return (
            self.promise is not None
            and term < self.promise[0]
            and now < self.promise_time + self.params.election_timeout_us[0]
        )

    def _abort_formation(self):
        self.forming = None
        self.responses = {}
        self.timers.pop("form", None)

    def _on_CgfResponse(self, msg: CgfResponse, now: int) -> List[Message]:
        if self.forming is None or msg.term != self.forming:
            return []
        self.responses[msg.src] = (msg.score, msg.location, (msg.last_log_term, msg.last_log_index),
                                   msg.group_epoch, tuple(msg.members), msg.drifted)
        if len(self.responses) >= self._honest_n():
            return self._finish_formation(now)
        return []

    def _honest_n(self) -> int:
        # a leader caught equivocating no longer counts toward any quorum
        return self.n - len(self.distrusted)

    def _formation_quorum(self) -> bool:
        """Majority of the sub-chain plus a majority of the newest reported group.

        Nodes this node holds fork evidence against are left out of both counts.
        """
        trusted = [nid for nid in self.responses if nid not in self.distrusted]
        if len(trusted) < self._honest_n() // 2 + 1:
            return False
        newest = None
        for _, _, _, epoch, members, _ in self.responses.values():
            if epoch is not None and members and (newest is None or epoch > newest[0]):
                newest = (epoch, members)
        if newest is None:
            return True
        members = [m for m in newest[1] if m not in self.distrusted]
        if not members:
            return True
        present = sum(1 for m in members if m in self.responses)
        return present >= len(members) // 2 + 1

    def _finish_formation(self, now: int) -> List[Message]:
        epoch = self.forming
        if epoch is None:
            return []
        self.timers.pop("form", None)
        if not self._formation_quorum():
            self.notes.append(("formation_failed", epoch, len(self.responses)))
            self._abort_formation()
            self.restarts += 1
            self.backoff = min(self.backoff * 2, self.params.max_backoff)
            window = self.params.form_window_us
            self._arm_election(now, window * self.backoff + self.rng.randint(0, window))
            return []
        p = self.params
        pool = [(nid, resp) for nid, resp in sorted(self.responses.items()) if nid not in self.distrusted]
        # drifted nodes keep their vote in the quorum but lose candidacy
        pool = [(nid, resp) for nid, resp in pool if not resp[5]] or pool
        eligible = [
            resp[0]
            for nid, resp in pool
            if p.neighborhood_radius is None or distance(resp[1], self.form_anchor) <= p.neighborhood_radius
        ]
        eligible = eligible or [self.responses[self.id][0]]
        cap = p.m_cap
        if p.selection_ratio < 1.0:
            cap = max(1, min(cap, math.ceil(p.selection_ratio * len(eligible))))
        ranked = select_candidates(eligible, cap)
        # the most up-to-date responder always joins, so committed entries survive the change
        seed = min(
            (nid for nid in self.responses if nid not in self.distrusted),
            key=lambda nid: (tuple(-x for x in self.responses[nid][2]), nid),
            default=None,
        )
        if seed is not None and seed not in ranked:
            ranked = ranked[: cap - 1] + [seed]
        floor_term, floor_index = self.responses[seed][2] if seed is not None else (0, 0)
        members = tuple(sorted(ranked))
        self._abort_formation()
        self.backoff = 1
        self.reform = False
        out: List[Message] = [
            GroupAnnounce(self.id, q, epoch, members=members, floor_index=floor_index, floor_term=floor_term)
            for q in self.peers
        ]
        self._accept_group(epoch, members, (floor_term, floor_index), now)
        return out

    def _adopt_view(self, epoch: int, members: Sequence[int], floor: tuple, now: int):
        self._observe_term(epoch, now)
        self.group = frozenset(members)
        self.group_formed = tuple(sorted(self.group))
        self.group_epoch = epoch
        self.group_size = len(self.group)
        self.floor = floor
        self.ineligible_timeouts = 0
        self.notes.append(("group", epoch, list(self.group_formed)))

    def _accept_group(self, epoch: int, members: Sequence[int], floor: tuple, now: int):
        if epoch + self.params.term_stride <= self.term:
            return
        self._adopt_view(epoch, members, floor, now)
        self.last_group_time = now
        self.leader_id = None
        self.votes = set()
        if self.in_group() and not self.drifted:
            self._set_role(Role.CANDIDATE)
        else:
            self._set_role(Role.FOLLOWER)
        self._arm_election(now)

    def _on_GroupAnnounce(self, msg: GroupAnnounce, now: int) -> List[Message]:
        if self.group_epoch is not None and msg.term <= self.group_epoch:
            return []
        if self.forming is not None and msg.term >= self.forming:
            self._abort_formation()
        self._accept_group(msg.term, msg.members, (msg.floor_term, msg.floor_index), now)
        return []

    # -- elections -------------------------------------------------------------

    def _campaign(self, now: int) -> List[Message]:
        if self.proposed:
            if not self.in_group() or self.drifted:
                self._set_role(Role.FOLLOWER)
                return self.start_election(now)
            if len(self.group) < self._majority():
                # evictions left too few members to ever reach a majority
                self._set_role(Role.FOLLOWER)
                return self.start_election(now)
            if self._log_head() < self.floor:
                # cannot win in this group; give the up-to-date members a chance first
                self.ineligible_timeouts += 1
                if self.ineligible_timeouts < 3:
                    self._arm_election(now)
                    return []
                self._leave_group()
                self._set_role(Role.FOLLOWER)
                return self.start_election(now)
            new_term = max(self.term, self.group_epoch) + 1
            if new_term >= self.group_epoch + self.params.term_stride:
                self._leave_group()
                self._set_role(Role.FOLLOWER)
                return self.start_election(now)
        else:
            new_term = self.term + 1
        self.term = new_term
        self.voted_for = self.id
        self.votes = {self.id}
        self.leader_id = None
        if self.role is Role.CANDIDATE:
            self.notes.append(("role", "Candidate", "Candidate", self.term))
        self._set_role(Role.CANDIDATE)
        self.notes.append(("election_started", self.term))
        self._arm_election(now)
        out: List[Message] = [
            VoteRequest(self.id, v, self.term, last_log_index=len(self.log), last_log_term=self.last_log_term())
            for v in sorted(self._voters() - {self.id})
        ]
        return out + self.on_majority(len(self.votes), now)

    def on_vote_request(self, msg: VoteRequest, now: int) -> List[Message]:
        if msg.term < self.term:
            return [Vote(self.id, msg.src, self.term, granted=False)]
        if self.proposed:
            eligible = (
                self.in_group()
                and msg.src in self.group
                and self.group_epoch <= msg.term < self.group_epoch + self.params.term_stride
                and msg.src not in self.distrusted
                and not self.drifted
                and (msg.last_log_term, msg.last_log_index) >= self.floor
            )
        else:
            eligible = msg.src not in self.distrusted
        self._observe_term(msg.term, now)
        up_to_date = (msg.last_log_term, msg.last_log_index) >= (self.last_log_term(), len(self.log))
        grant = eligible and up_to_date and self.voted_for in (None, msg.src)
        if grant:
            self.voted_for = msg.src
            self._arm_election(now)
            self.notes.append(("vote", msg.src, self.term))
        return [Vote(self.id, msg.src, self.term, granted=grant)]

    _on_VoteRequest = on_vote_request

    def _on_Vote(self, msg: Vote, now: int) -> List[Message]:
        if self._observe_term(msg.term, now):
            return []
        if self.role is not Role.CANDIDATE or msg.term != self.term or not msg.granted:
            return []
        if msg.src not in self._voters():
            return []
        self.votes.add(msg.src)
        return self.on_majority(len(self.votes), now)

    def on_majority(self, votes: int, now: int) -> List[Message]:
        """Become leader once ``votes`` reaches a majority of the voter set."""
        if self.role is not Role.CANDIDATE or votes < self._majority():
            return []
        self._set_role(Role.LEADER)
        self.leader_id = self.id
        self.timers.pop("election", None)
        last = len(self.log)
        self.next_index = {}
        self.match_index = {}
        self.last_sent = {}
        for p in self.peers:
            self.next_index[p] = last + 1
            self.match_index[p] = 0
            self.last_sent[p] = _NEVER
        hb = self.params.heartbeat_us
        if self.proposed:
            self.notified_upto = self.commit_index
            self.last_notify = now
            out: List[Message] = [
                LeaderAnnounce(self.id, p, self.term, leader=self.id, group_epoch=self.group_epoch,
                               members=self.group_formed)
                for p in self.peers
            ]
            for p in self._targets():
                self.last_sent[p] = now
            self.timers["heartbeat"] = now + hb
            self.timers["block"] = now + self.params.block_interval_us
            return out
        out = [self._append_for(p, now) for p in self._targets()]
        self.timers["heartbeat"] = now + hb
        return out

    def on_higher_term(self, observed_term: int, leader_id: Optional[int], now: int):
        """Adopt a newer term (or an equal-term leader) and step down."""
        if observed_term < self.term:
            return
        if observed_term > self.term:
            self._observe_term(observed_term, now)
        elif self.role is Role.CANDIDATE and leader_id is not None:
            self._set_role(Role.FOLLOWER)
        if leader_id is not None and leader_id != self.id:
            self.leader_id = leader_id
            self.last_leader_contact = now
            self._arm_election(now)

    def _on_LeaderAnnounce(self, msg: LeaderAnnounce, now: int) -> List[Message]:
        if msg.term < self.term or msg.leader in self.distrusted:
            return []
        if msg.term == self.term and self.role is Role.LEADER:
            return []
        stride = self.params.term_stride
        if (
            self.proposed
            and msg.group_epoch is not None
            and (self.group_epoch is None or msg.group_epoch > self.group_epoch)
            and msg.group_epoch <= msg.term < msg.group_epoch + stride
        ):
            # missed the GroupAnnounce; learn the view from the winner
            if self.forming is not None:
                self._abort_formation()
            self._adopt_view(msg.group_epoch, msg.members, (0, 0), now)
        self.on_higher_term(msg.term, msg.leader, now)
        if self.role is Role.CANDIDATE:
            self._set_role(Role.FOLLOWER)
        self.backoff = 1
        return []

    # -- log replication -------------------------------------------------------

    def _append_for(self, peer: int, now: int) -> AppendEntry:
        ni = self.next_index.get(peer, len(self.log) + 1)
        prev = ni - 1
        prev_term = self.log[prev - 1].term if prev > 0 else 0
        entries = tuple(self.log[prev:])
        self.next_index[peer] = len(self.log) + 1
        self.last_sent[peer] = now
        return AppendEntry(self.id, peer, self.term, prev_index=prev, prev_term=prev_term,
                           entries=entries, commit=self.commit_index)

    def replicate(self, client_tx: str, now: int) -> List[Message]:
        """Append a client transaction and ship it to the agreement set."""
        if self.role is not Role.LEADER:
            raise NotLeader(f"node {self.id} is {self.role.value}")
        entry = LogEntry(self.term, len(self.log) + 1, client_tx)
        self.log.append(entry)
        targets = self._targets()
        out: List[Message] = [self._append_for(p, now) for p in targets]
        if self.fork_armed and targets:
            self.fork_armed = False
            bad = LogEntry(entry.term, entry.index, fork_digest(client_tx))
            prev_term = self.log[entry.index - 2].term if entry.index > 1 else 0
            out += [
                AppendEntry(self.id, p, self.term, prev_index=entry.index - 1, prev_term=prev_term,
                            entries=(bad,), commit=self.commit_index)
                for p in targets
            ]
            self.notes.append(("fork_emitted", entry.index, self.term))
        return out + self._advance_commit(now)

    def _on_ClientRequest(self, msg: ClientRequest, now: int) -> List[Message]:
        if self.role is Role.LEADER:
            return self.replicate(msg.digest, now)
        self.notes.append(("client_dropped", msg.digest))
        return []

    def _on_AppendEntry(self, msg: AppendEntry, now: int) -> List[Message]:
        hb = not msg.entries
        if msg.term < self.term:
            return [Ack(self.id, msg.src, self.term, success=False, match_index=len(self.log), heartbeat=hb)]
        if msg.src in self.distrusted:
            return []
        if msg.term == self.term and self.role is Role.LEADER:
            return []
        if self.proposed:
            if self._fenced(msg.term, now):
                return []
            if self.group_epoch is None or msg.term >= self.group_epoch + self.params.term_stride:
                # a leader of a group this node never heard of; ask for the view
                return [Ack(self.id, msg.src, self.term, success=False, match_index=len(self.log),
                            heartbeat=hb, need_view=True)]
        self.on_higher_term(msg.term, msg.src, now)
        self.backoff = 1
        if msg.prev_index > len(self.log) or (
            msg.prev_index > 0 and self.log[msg.prev_index - 1].term != msg.prev_term
        ):
            hint = min(len(self.log), msg.prev_index - 1)
            return [Ack(self.id, msg.src, self.term, success=False, match_index=hint, heartbeat=hb)]
        for e in msg.entries:
            if e.index <= len(self.log):
                mine = self.log[e.index - 1]
                if mine.term == e.term:
                    if mine.digest != e.digest:
                        return self._on_fork(msg.src, now, e.index, (mine.digest, e.digest))
                    continue
                del self.log[e.index - 1:]
            self.log.append(e)
        last_new = msg.prev_index + len(msg.entries)
        if msg.commit > self.commit_index:
            self.commit_index = min(msg.commit, last_new)
        return [Ack(self.id, msg.src, self.term, success=True, match_index=last_new, heartbeat=hb)]

    def _on_fork(self, leader: int, now: int, index: int, digests: Tuple[str, str],
                 gossip: bool = True) -> List[Message]:
        # conflicting entries for one (index, term): the leader equivocated
        if leader in self.distrusted:
            return []
        self.distrusted.add(leader)
        self.notes.append(("fork_detected", leader, self.term))
        if self.group is not None and leader in self.group:
            self.group = self.group - {leader}
            self.notes.append(("evicted", [leader], "fork"))
        self.leader_id = None
        lo = self.params.election_timeout_us[0]
        if not self.proposed or self.in_group():
            self._arm_election(now, self.rng.randint(1, max(1, lo // 4)))
        if not gossip:
            return []
        # let every peer stop trusting the leader too, so a quorum can replace it
        return [ForkEvidence(self.id, p, self.term, leader=leader, index=index, digests=digests)
                for p in sorted(self.peers) if p not in (self.id, leader)]

    def _on_ForkEvidence(self, msg: ForkEvidence, now: int) -> List[Message]:
        if msg.leader == self.id or msg.digests[0] == msg.digests[1]:
            return []
        return self._on_fork(msg.leader, now, msg.index, msg.digests, gossip=False)

    def _on_Ack(self, msg: Ack, now: int) -> List[Message]:
        if msg.need_view:
            if self.role is Role.LEADER and msg.term <= self.term:
                return [LeaderAnnounce(self.id, msg.src, self.term, leader=self.id, group_epoch=self.group_epoch,
                                       members=self.group_formed)]
            return []
        if self._observe_term(msg.term, now):
            return []
        if self.role is not Role.LEADER or msg.term != self.term:
            return []
        p = msg.src
        if msg.success:
            if msg.match_index > self.match_index.get(p, 0):
                self.match_index[p] = msg.match_index
            self.next_index[p] = max(self.next_index.get(p, 1), self.match_index[p] + 1)
            return self._advance_commit(now)
        self.next_index[p] = max(1, min(self.next_index.get(p, 1) - 1, msg.match_index + 1))
        if p in self._targets():
            return [self._append_for(p, now)]
        return []

    def _advance_commit(self, now: int) -> List[Message]:
        needed = self._majority()
        voters = self._voters()
        new_commit = self.commit_index
        for idx in range(len(self.log), self.commit_index, -1):
            if self.log[idx - 1].term != self.term:
                break
            count = sum(1 for v in voters if v == self.id or self.match_index.get(v, 0) >= idx)
            if count >= needed:
                new_commit = idx
                break
        if new_commit <= self.commit_index:
            return []
        committed = self.log[self.commit_index:new_commit]
        self.commit_index = new_commit
        acked = sorted(v for v in voters if v != self.id and self.match_index.get(v, 0) >= new_commit)
        self.notes.append(("commit", [(e.index, e.digest) for e in committed], acked))
        if self.proposed and self.params.notify_per_tx:
            return self._notify(now)
        return []

    def _heartbeat(self, now: int) -> List[Message]:
        if self.role is not Role.LEADER:
            return []
        hb = self.params.heartbeat_us
        out = [self._append_for(p, now) for p in self._targets() if now - self.last_sent.get(p, _NEVER) >= hb]
        self.timers["heartbeat"] = now + hb
        return out

    def _notify(self, now: int) -> List[Message]:
        group = self.group or frozenset()
        start = self.notified_upto
        entries = tuple(self.log[start:self.commit_index])
        prev_term = self.log[start - 1].term if start > 0 else 0
        self.notified_upto = self.commit_index
        self.last_notify = now
        return [
            Notification(self.id, p, self.term, prev_index=start, prev_term=prev_term,
                         entries=entries, commit=self.commit_index)
            for p in self.peers
            if p not in group
        ]

    def _block_tick(self, now: int) -> List[Message]:
        if self.role is not Role.LEADER:
            return []
        interval = self.params.block_interval_us
        self.timers["block"] = now + interval
        if self.params.notify_per_tx and now - self.last_notify < interval:
            return []
        return self._notify(now)

    def _on_Notification(self, msg: Notification, now: int) -> List[Message]:
        if msg.term < self.term or msg.src in self.distrusted:
            return []
        if msg.term == self.term and self.role is Role.LEADER:
            return []
        self.on_higher_term(msg.term, msg.src, now)
        # notified entries are committed; apply them only onto a matching prefix
        if msg.prev_index > len(self.log) or (
            msg.prev_index > 0 and self.log[msg.prev_index - 1].term != msg.prev_term
        ):
            return []
        for e in msg.entries:
            if e.index <= len(self.log):
                mine = self.log[e.index - 1]
                if mine.term == e.term and mine.digest == e.digest:
                    continue
                del self.log[e.index - 1:]
            self.log.append(e)
        if msg.entries:
            self.commit_index = max(self.commit_index, msg.entries[-1].index)
        return []

    # -- geography -----------------------------------------------------------

    def evict_drifted(self, drift_reports, now: int) -> List[Message]:
        """Apply a periodic location audit: ``[(node_id, drifted), ...]``."""
        if not self.proposed:
            return []
        drifted = {nid for nid, flag in drift_reports if flag}
        self.drifted = self.id in drifted
        if self.group is not None:
            removed = self.group & drifted
            if removed:
                self.group = self.group - removed
                self.notes.append(("evicted", sorted(removed), "drift"))
        lo = self.params.election_timeout_us[0]
        if self.role is Role.LEADER and self.drifted:
            self.notes.append(("demoted", "drift", self.term))
            self._set_role(Role.FOLLOWER)
            self.leader_id = None
            self.timers.pop("heartbeat", None)
            self.timers.pop("block", None)
            self._arm_election(now)
        elif self.leader_id is not None and self.leader_id in drifted:
            self.leader_id = None
            if self.in_group() and not self.drifted:
                self._arm_election(now, self.rng.randint(1, max(1, lo // 4)))
        if self.drifted and self.role is Role.CANDIDATE:
            self._set_role(Role.FOLLOWER)
        return []

    def regroup(self, now: int) -> List[Message]:
        """Ordered by the upper layer after a rejected checkpoint."""
        if not self.proposed:
            return []
        if self.role is Role.LEADER:
            self.notes.append(("demoted", "regroup", self.term))
            self.timers.pop("heartbeat", None)
            self.timers.pop("block", None)
        self._set_role(Role.FOLLOWER)
        self.leader_id = None
        self._abort_formation()
        return self.start_election(now, reform=True)

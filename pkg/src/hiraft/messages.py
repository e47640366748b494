"""Wire messages exchanged by consensus nodes, with byte-size accounting.

No real encoding is produced; ``SizeTable`` assigns each message a
nominal size that feeds the simulator's byte counters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import ClassVar, Optional, Tuple

from .geo import CgfScore, GeoPoint


@dataclass(frozen=True)
class LogEntry:
    term: int
    index: int
    digest: str


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    term: int
    kind: ClassVar[str] = "message"


@dataclass(frozen=True)
class FormGroup(Message):
    anchor: GeoPoint = GeoPoint(0.0, 0.0)
    # set when the upper layer orders a regroup; bypasses leader stickiness
    reform: bool = False
    kind: ClassVar[str] = "FormGroup"


@dataclass(frozen=True)
class CgfResponse(Message):
    score: Optional[CgfScore] = None
    location: GeoPoint = GeoPoint(0.0, 0.0)
    # responder's log head and current group view, for the formation quorum
    last_log_index: int = 0
    last_log_term: int = 0
    group_epoch: Optional[int] = None
    members: Tuple[int, ...] = ()
    drifted: bool = False
    kind: ClassVar[str] = "CgfResponse"


@dataclass(frozen=True)
class GroupAnnounce(Message):
    members: Tuple[int, ...] = ()
    # log head of the most up-to-date responder; electable candidates must reach it
    floor_index: int = 0
    floor_term: int = 0
    kind: ClassVar[str] = "GroupAnnounce"


@dataclass(frozen=True)
class VoteRequest(Message):
    last_log_index: int = 0
    last_log_term: int = 0
    kind: ClassVar[str] = "VoteRequest"


@dataclass(frozen=True)
class Vote(Message):
    granted: bool = False
    kind: ClassVar[str] = "Vote"


@dataclass(frozen=True)
class LeaderAnnounce(Message):
    leader: int = -1
    group_epoch: Optional[int] = None
    members: Tuple[int, ...] = ()
    kind: ClassVar[str] = "LeaderAnnounce"


@dataclass(frozen=True)
class AppendEntry(Message):
    prev_index: int = 0
    prev_term: int = 0
    entries: Tuple[LogEntry, ...] = ()
    commit: int = 0
    kind: ClassVar[str] = "AppendEntry"


@dataclass(frozen=True)
class Ack(Message):
    success: bool = True
    match_index: int = 0
    # acknowledges an AppendEntry that carried no entries
    heartbeat: bool = False
    # the sender does not know the leader's candidate group yet
    need_view: bool = False
    kind: ClassVar[str] = "Ack"


@dataclass(frozen=True)
class Notification(Message):
    """Committed entries pushed by the leader to non-candidate followers."""

    prev_index: int = 0
    prev_term: int = 0
    entries: Tuple[LogEntry, ...] = ()
    commit: int = 0
    kind: ClassVar[str] = "Notification"


@dataclass(frozen=True)
class ForkEvidence(Message):
    """Two different entries a leader sent for one (index, term)."""

    leader: int = -1
    index: int = 0
    digests: Tuple[str, str] = ("", "")
    kind: ClassVar[str] = "ForkEvidence"


@dataclass(frozen=True)
class ClientRequest(Message):
    digest: str = ""
    kind: ClassVar[str] = "ClientRequest"


MESSAGE_TYPES = {
    cls.kind: cls
    for cls in (
        FormGroup,
        CgfResponse,
        GroupAnnounce,
        VoteRequest,
        Vote,
        LeaderAnnounce,
        AppendEntry,
        Ack,
        Notification,
        ForkEvidence,
        ClientRequest,
    )
}


@dataclass(frozen=True)
class SizeTable:
    """Nominal wire sizes in bytes."""

    form_group: int = 64
    cgf_response: int = 48
    group_announce: int = 32
    group_announce_per_member: int = 8
    vote_request: int = 56
    vote: int = 24
    leader_announce: int = 40
    append_entry: int = 96
    append_entry_per_entry: int = 64
    ack: int = 24
    notification: int = 72
    fork_evidence: int = 176
    client_request: int = 64

    def size_of(self, msg: Message) -> int:
        kind = msg.kind
        if kind == "AppendEntry":
            return self.append_entry + self.append_entry_per_entry * len(msg.entries)
        if kind == "GroupAnnounce":
            return self.group_announce + self.group_announce_per_member * len(msg.members)
        return {
            "FormGroup": self.form_group,
            "CgfResponse": self.cgf_response,
            "VoteRequest": self.vote_request,
            "Vote": self.vote,
            "LeaderAnnounce": self.leader_announce,
            "Ack": self.ack,
            "Notification": self.notification,
            "ForkEvidence": self.fork_evidence,
            "ClientRequest": self.client_request,
        }[kind]

    @classmethod
    def from_dict(cls, data: dict) -> "SizeTable":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown message size keys: {sorted(unknown)}")
        return cls(**data)


def is_agreement(msg: Message) -> bool:
    """AppendEntry carrying entries, or the Ack answering one."""
    if msg.kind == "AppendEntry":
        return bool(msg.entries)
    if msg.kind == "Ack":
        return not msg.heartbeat
    return False


def describe(msg: Message) -> dict:
    """Compact, JSON-friendly summary used in traces."""
    out = {"type": msg.kind, "src": msg.src, "dst": msg.dst, "term": msg.term}
    if msg.kind == "AppendEntry":
        out["n_entries"] = len(msg.entries)
        if msg.entries:
            out["first"] = msg.entries[0].index
            out["digests"] = [e.digest[:12] for e in msg.entries]
    elif msg.kind == "Ack":
        out["ok"] = msg.success
        out["match"] = msg.match_index
    elif msg.kind == "Vote":
        out["granted"] = msg.granted
    elif msg.kind == "GroupAnnounce":
        out["members"] = list(msg.members)
    elif msg.kind == "CgfResponse" and msg.score is not None:
        out["cgf"] = round(msg.score.combined, 6)
    elif msg.kind == "Notification":
        out["n_entries"] = len(msg.entries)
    elif msg.kind in ("LeaderAnnounce", "ForkEvidence"):
        out["leader"] = msg.leader
    return out

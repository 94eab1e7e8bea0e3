"""Decentralized voting on propositions and the migration that follows a commit.

The region's current host (the proposer) coordinates. The participants are
the target module and the owning CPU; commit needs both to accept.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .engine import Message, MsgKind
from .mesh import NodeRef
from .optimizer import CONTROL_BYTES, PropKind, Proposition

if TYPE_CHECKING:
    from .memory_agent import MemoryAgent


class Vote(enum.Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"
    PENDING = "Pending"


class RejectReason(enum.Enum):
    NO_SPACE = "NoSpace"
    OVERLOADED = "Overloaded"
    STALE_BENEFIT = "StaleBenefit"
    REGION_BUSY = "RegionBusy"
    TIMEOUT = "Timeout"


class VotePhase(enum.Enum):
    VOTING = "Voting"
    COMMITTING = "Committing"
    DONE = "Done"
    ABORTED = "Aborted"


_ALLOWED = {
    VotePhase.VOTING: {VotePhase.COMMITTING, VotePhase.ABORTED},
    VotePhase.COMMITTING: {VotePhase.DONE},
    VotePhase.DONE: set(),
    VotePhase.ABORTED: set(),
}


@dataclass
class VoteState:
    proposition: Proposition
    started_at: int
    votes: dict[NodeRef, Vote] = field(default_factory=dict)
    reasons: dict[NodeRef, RejectReason] = field(default_factory=dict)
    phase: VotePhase = VotePhase.VOTING

    def __post_init__(self) -> None:
        if not self.votes:
            self.votes = {self.proposition.target: Vote.PENDING,
                          self.proposition.owner: Vote.PENDING}

    @property
    def participants(self) -> tuple[NodeRef, NodeRef]:
        return self.proposition.target, self.proposition.owner

    def record(self, participant: NodeRef, vote: Vote, reason: RejectReason | None = None) -> None:
        if participant not in self.votes:
            raise ValueError(f"{participant} is not a participant")
        self.votes[participant] = vote
        if reason is not None:
            self.reasons[participant] = reason

    def outcome(self) -> str | None:
        """'commit' on unanimity, 'abort' on any reject, None while pending."""
        values = self.votes.values()
        if any(v is Vote.REJECT for v in values):
            return "abort"
        if all(v is Vote.ACCEPT for v in values):
            return "commit"
        return None

    def advance(self, phase: VotePhase) -> None:
        if phase not in _ALLOWED[self.phase]:
            raise ValueError(f"illegal vote transition {self.phase.value} -> {phase.value}")
        self.phase = phase


def owner_vote(*, region_live: bool, freeing: bool, current_module: NodeRef | None,
               p: Proposition, hop) -> tuple[Vote, RejectReason | None]:
    """Owner-side validation. ``hop`` is the mesh hop-distance function."""
    if not region_live or freeing or current_module != p.source:
        return Vote.REJECT, RejectReason.REGION_BUSY
    if p.kind is PropKind.LOCALITY and not (
        hop(p.owner.coord, p.target.coord) < hop(p.owner.coord, p.source.coord)
    ):
        return Vote.REJECT, RejectReason.STALE_BENEFIT
    return Vote.ACCEPT, None


def prop_body(p: Proposition) -> dict:
    return {"pid": p.proposition_id, "prop": p, "region_id": p.region_id}


class MigrationCoordinator:
    """Voting and migration state machine of one memory module.

    Acts as coordinator for propositions on the module's own regions and as
    target participant for propositions from other modules.
    """

    def __init__(self, module: "MemoryAgent"):
        self.m = module
        self.active: dict[int, VoteState] = {}
        self.finished: dict[int, VoteState] = {}
        self.reservations: dict[int, tuple[int, list[int]]] = {}  # pid -> (region, frames)

    # -- coordinator side -------------------------------------------------

    def start_vote(self, p: Proposition) -> bool:
        m = self.m
        rec = m.records.get(p.region_id)
        if rec is None or rec.locked_by is not None:
            m.system.metrics.n_dropped += 1
            return False
        rec.locked_by = p.proposition_id
        vs = VoteState(p, m.sim.now)
        self.active[p.proposition_id] = vs
        m.system.metrics.n_vote_rounds += 1
        for participant in vs.participants:
            m.send(MsgKind.PROPOSE, participant, prop_body(p))
        m.sim.set_timer(m.node, ("vote_timeout", p.proposition_id),
                        m.sim.now + m.vote_timeout)
        return True

    def on_vote(self, msg: Message) -> None:
        vs = self.active.get(msg.body["pid"])
        if vs is None or vs.phase is not VotePhase.VOTING:
            return  # late vote after timeout
        vs.record(msg.src, msg.body["vote"], msg.body.get("reason"))
        outcome = vs.outcome()
        if outcome is not None:
            self.decide(vs, outcome)

    def on_timeout(self, pid: int) -> None:
        vs = self.active.get(pid)
        if vs is None or vs.phase is not VotePhase.VOTING:
            return  # stale timer
        for participant, vote in vs.votes.items():
            if vote is Vote.PENDING:
                vs.record(participant, Vote.REJECT, RejectReason.TIMEOUT)
        self.decide(vs, "abort")

    def decide(self, vs: VoteState, outcome: str) -> None:
        m = self.m
        p = vs.proposition
        if outcome == "commit":
            vs.advance(VotePhase.COMMITTING)
            for participant in vs.participants:
                m.send(MsgKind.COMMIT, participant, {"pid": p.proposition_id})
            self.execute_migration(vs)
            return
        vs.advance(VotePhase.ABORTED)
        for participant in vs.participants:
            m.send(MsgKind.ABORT, participant, {"pid": p.proposition_id})
        m.system.metrics.n_aborted += 1
        self._close(p.proposition_id)
        rec = m.records[p.region_id]
        rec.locked_by = None
        m.release_pending(p.region_id, forward_to=None)

    def execute_migration(self, vs: VoteState) -> None:
        m = self.m
        p = vs.proposition
        rec = m.records[p.region_id]
        data = [None if m.frames[f] is None else bytes(m.frames[f]) for f in rec.frames]
        m.send(MsgKind.MIGRATE_DATA, p.target,
               {"pid": p.proposition_id, "region_id": p.region_id, "owner": rec.owner,
                "vpage_base": rec.vpage_base, "data": data},
               payload_bytes=len(rec.frames) * m.page_size)

    def on_migrate_ack(self, msg: Message) -> None:
        vs = self.active[msg.body["pid"]]
        p = vs.proposition
        self.m.send(MsgKind.TABLE_UPDATE, p.owner,
                    {"pid": p.proposition_id, "region_id": p.region_id,
                     "new_module": p.target, "new_frames": msg.body["frames"]},
                    payload_bytes=CONTROL_BYTES + 4 * len(msg.body["frames"]))

    def on_table_update_ack(self, msg: Message) -> None:
        m = self.m
        vs = self.active[msg.body["pid"]]
        p = vs.proposition
        m.drop_region(p.region_id)
        m.forwarded[p.region_id] = p.target
        vs.advance(VotePhase.DONE)
        self._close(p.proposition_id)
        metrics = m.system.metrics
        metrics.n_committed += 1
        hop = m.mesh.hop_distance
        metrics.committed_moves.append(
            (p.kind, hop(p.owner.coord, p.source.coord), hop(p.owner.coord, p.target.coord))
        )
        m.release_pending(p.region_id, forward_to=p.target)

    def _close(self, pid: int) -> None:
        self.finished[pid] = self.active.pop(pid)

    # -- target participant side -------------------------------------------

    def on_propose(self, msg: Message) -> None:
        p: Proposition = msg.body["prop"]
        vote, reason = self.target_vote(p)
        body = {"pid": p.proposition_id, "vote": vote}
        if reason is not None:
            body["reason"] = reason
        self.m.send(MsgKind.VOTE, msg.src, body)

    def target_vote(self, p: Proposition) -> tuple[Vote, RejectReason | None]:
        m = self.m
        busy = p.region_id in m.records or any(
            region == p.region_id for region, _ in self.reservations.values()
        )
        if busy:
            return Vote.REJECT, RejectReason.REGION_BUSY
        if len(m.free) < p.n_pages:
            return Vote.REJECT, RejectReason.NO_SPACE
        if m.utilization() >= m.cfg.balance_threshold:
            return Vote.REJECT, RejectReason.OVERLOADED
        self.reservations[p.proposition_id] = (p.region_id, m.take_frames(p.n_pages))
        return Vote.ACCEPT, None

    def on_abort(self, msg: Message) -> None:
        held = self.reservations.pop(msg.body["pid"], None)
        if held is not None:
            self.m.give_frames(held[1])

    def on_commit(self, msg: Message) -> None:
        pass  # the reservation is consumed by MigrateData

    def on_migrate_data(self, msg: Message) -> None:
        m = self.m
        region_id, frames = self.reservations.pop(msg.body["pid"])
        for f, page in zip(frames, msg.body["data"]):
            m.frames[f] = None if page is None else bytearray(page)
        m.install_region(region_id, msg.body["owner"], frames, msg.body["vpage_base"])
        m.send(MsgKind.MIGRATE_ACK, msg.src, {"pid": msg.body["pid"], "frames": list(frames)})

"""Behaviour shared by every tile's management component: messaging and status gossip."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

from .engine import PRIO_TIMER, Message, MsgKind
from .mesh import NodeRef
from .monitoring import STATUS_RECORD_BYTES, KnowledgeBase, StatusRecord
from .optimizer import CONTROL_BYTES

if TYPE_CHECKING:
    from .system import SamSystem


class Agent:
    def __init__(self, node: NodeRef, system: "SamSystem"):
        self.node = node
        self.system = system
        self.sim = system.sim
        self.cfg = system.cfg
        self.mesh = system.mesh
        self.kb = KnowledgeBase(node)
        self.neighbors = [self.mesh.node_at(c)
                          for c in self.mesh.neighborhood(node.coord, self.cfg.radius)]
        self._handlers = {}
        self.emissions = 0

    def start(self) -> None:
        if self.cfg.monitoring:
            phase = self.mesh.linear_index(self.node.coord)
            self.sim.set_timer(self.node, "emit", phase, background=True)

    def send(self, kind: MsgKind, dst: NodeRef, body: dict[str, Any],
             payload_bytes: int = CONTROL_BYTES) -> int:
        return self.sim.post_message(Message(kind, self.node, dst, body, payload_bytes))

    def on_message(self, msg: Message) -> None:
        self._handlers[msg.kind](msg)

    def on_timer(self, tag: Any) -> None:
        if tag == "emit":
            if not self.sim.stopping:
                self.emit_status()
                self.sim.set_timer(self.node, "emit", self.sim.now + self.cfg.emission_period,
                                   priority=PRIO_TIMER, background=True)
            return
        self.on_local_timer(tag)

    def on_local_timer(self, tag: Any) -> None:
        raise ValueError(f"{self.node}: unexpected timer {tag!r}")

    # -- monitoring ---------------------------------------------------------

    def own_record(self) -> StatusRecord:
        return StatusRecord(self.node, 0, 0.0, self.sim.now)

    def status_payload(self) -> list[StatusRecord]:
        """Own fresh record plus cached records young enough to relay."""
        now = self.sim.now
        return [self.own_record()] + self.kb.relayable(now, 2 * self.cfg.emission_period)

    def emit_status(self) -> None:
        records = self.status_payload()
        size = STATUS_RECORD_BYTES * len(records)
        for dst in self.neighbors:
            self.send(MsgKind.STATUS, dst, {"records": records}, payload_bytes=size)
        self.emissions += 1

    def on_status(self, msg: Message) -> None:
        self.kb.merge(msg.body["records"])

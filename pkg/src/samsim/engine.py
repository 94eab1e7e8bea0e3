"""Deterministic discrete-event kernel.

Events are ordered by ``(fire_at, kind_priority, seq)``; ``seq`` is a global
monotone counter so the order is total and runs are reproducible.
"""

from __future__ import annotations

import enum
import heapq
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, TextIO

from .errors import DeadlockDetected
from .mesh import Mesh, NodeRef

# kind priorities, lower fires first at equal cycles
PRIO_BOUNDARY = 0
PRIO_PROBE = 1
PRIO_CONTROL = 2
PRIO_MIGRATION = 3
PRIO_TIMER = 4
PRIO_STATUS = 5
PRIO_DATA = 6
PRIO_TRACE = 7


class MsgKind(enum.Enum):
    ALLOC_REQ = "AllocReq"
    ALLOC_RESP = "AllocResp"
    READ_REQ = "ReadReq"
    READ_RESP = "ReadResp"
    WRITE_REQ = "WriteReq"
    WRITE_ACK = "WriteAck"
    FREE_REQ = "FreeReq"
    FREE_ACK = "FreeAck"
    STATUS = "Status"
    PROPOSE = "Propose"
    VOTE = "Vote"
    COMMIT = "Commit"
    ABORT = "Abort"
    MIGRATE_DATA = "MigrateData"
    MIGRATE_ACK = "MigrateAck"
    TABLE_UPDATE = "TableUpdate"
    TABLE_UPDATE_ACK = "TableUpdateAck"

    @property
    def priority(self) -> int:
        return _MSG_PRIORITY[self]


_MSG_PRIORITY = {k: PRIO_DATA for k in MsgKind}
_MSG_PRIORITY.update(
    {
        MsgKind.PROPOSE: PRIO_CONTROL,
        MsgKind.VOTE: PRIO_CONTROL,
        MsgKind.COMMIT: PRIO_CONTROL,
        MsgKind.ABORT: PRIO_CONTROL,
        MsgKind.MIGRATE_DATA: PRIO_MIGRATION,
        MsgKind.MIGRATE_ACK: PRIO_MIGRATION,
        MsgKind.TABLE_UPDATE: PRIO_MIGRATION,
        MsgKind.TABLE_UPDATE_ACK: PRIO_MIGRATION,
        MsgKind.STATUS: PRIO_STATUS,
    }
)


class EventKind(enum.Enum):
    MESSAGE_DELIVERY = "MessageDelivery"
    TIMER_EXPIRY = "TimerExpiry"
    TRACE_STEP = "TraceStep"


@dataclass(slots=True)
class Message:
    kind: MsgKind
    src: NodeRef
    dst: NodeRef
    body: dict[str, Any] = field(default_factory=dict)
    payload_bytes: int = 8


@dataclass(slots=True)
class Event:
    fire_at: int
    kind: EventKind
    seq: int
    target: NodeRef
    payload: Any
    background: bool = False


class Simulator:
    """Event queue, clock and message transport for one simulation instance.

    Agents are registered by coordinate and must provide ``on_message(msg)``
    and ``on_timer(tag)``; CPU agents additionally ``on_trace_step()``.
    """

    def __init__(self, mesh: Mesh, log: TextIO | None = None):
        self.mesh = mesh
        self.now = 0
        self.agents: dict[Any, Any] = {}
        self.msg_counts: Counter[MsgKind] = Counter()
        self.posted = 0
        self.delivered = 0
        self.dropped = 0
        self.stopping = False
        # test hook: return True to withhold a message (it is never delivered)
        self.drop_hook: Callable[[Message], bool] | None = None
        self._queue: list[tuple[int, int, int, Event]] = []
        self._seq = itertools.count()
        self._work = 0
        self._log = log
        self.last_fire = 0

    def register(self, node: NodeRef, agent: Any) -> None:
        self.agents[node.coord] = agent

    def _push(self, fire_at: int, prio: int, kind: EventKind, target: NodeRef,
              payload: Any, background: bool) -> None:
        if fire_at < self.now:
            raise ValueError(f"event at {fire_at} scheduled in the past (now {self.now})")
        seq = next(self._seq)
        ev = Event(fire_at, kind, seq, target, payload, background)
        if not background:
            self._work += 1
        heapq.heappush(self._queue, (fire_at, prio, seq, ev))

    def post_message(self, msg: Message) -> int:
        """Send ``msg``; returns its delivery cycle."""
        self.msg_counts[msg.kind] += 1
        self.posted += 1
        fire_at = self.now + self.mesh.message_latency(
            msg.src.coord, msg.dst.coord, msg.payload_bytes
        )
        if self.drop_hook is not None and self.drop_hook(msg):
            self.dropped += 1
            return fire_at
        self._push(fire_at, msg.kind.priority, EventKind.MESSAGE_DELIVERY, msg.dst, msg,
                   background=msg.kind is MsgKind.STATUS)
        return fire_at

    def set_timer(self, node: NodeRef, tag: Any, fire_at: int, *, priority: int = PRIO_TIMER,
                  background: bool = False) -> None:
        self._push(fire_at, priority, EventKind.TIMER_EXPIRY, node, tag, background)

    def schedule_trace_step(self, node: NodeRef, fire_at: int) -> None:
        self._push(fire_at, PRIO_TRACE, EventKind.TRACE_STEP, node, None, False)

    @property
    def pending_work(self) -> int:
        return self._work

    def next_time(self) -> int | None:
        """Cycle of the earliest pending event, or None when the queue is empty."""
        return self._queue[0][0] if self._queue else None

    def step(self) -> Event:
        fire_at, _prio, _seq, ev = heapq.heappop(self._queue)
        if not ev.background:
            self._work -= 1
        self.now = fire_at
        agent = self.agents[ev.target.coord]
        if ev.kind is EventKind.MESSAGE_DELIVERY:
            self.delivered += 1
            if self._log is not None:
                self._write_log(ev)
            agent.on_message(ev.payload)
        elif ev.kind is EventKind.TIMER_EXPIRY:
            if self._log is not None:
                self._write_log(ev)
            agent.on_timer(ev.payload)
        else:
            if self._log is not None:
                self._write_log(ev)
            agent.on_trace_step()
        return ev

    def run(self, is_done: Callable[[], bool], max_cycles: int | None = None) -> None:
        """Process events until ``is_done()`` holds, then drain what is in flight.

        Once done, ``stopping`` is set so periodic activities stop re-arming;
        remaining in-flight messages are still delivered.
        """
        if is_done():
            self.stopping = True
        while self._queue:
            if not self.stopping and self._work == 0:
                raise DeadlockDetected(
                    f"only background activity left at cycle {self.now} with work pending"
                )
            if max_cycles is not None and self._queue[0][0] > max_cycles:
                raise DeadlockDetected(f"simulation exceeded max_cycles={max_cycles}")
            self.step()
            if not self.stopping and is_done():
                self.stopping = True
        if not self.stopping:
            raise DeadlockDetected(f"event queue empty at cycle {self.now} with work pending")

    def _write_log(self, ev: Event) -> None:
        if ev.kind is EventKind.MESSAGE_DELIVERY:
            m: Message = ev.payload
            summary = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(m.body.items()) if k != "data")
            self._log.write(f"{ev.fire_at} {m.kind.value} {m.src} -> {m.dst} {summary}\n")
        elif ev.kind is EventKind.TIMER_EXPIRY:
            self._log.write(f"{ev.fire_at} TimerExpiry {ev.target} -> {ev.target} {_fmt(ev.payload)}\n")
        else:
            self._log.write(f"{ev.fire_at} TraceStep {ev.target} -> {ev.target} -\n")


def _fmt(v: Any) -> str:
    if isinstance(v, Message):
        return f"{v.kind.value}@{v.src}"
    if isinstance(v, tuple):
        return ":".join(_fmt(x) for x in v)
    if isinstance(v, enum.Enum):
        return str(v.value)
    if isinstance(v, (list, dict)):
        return f"[{len(v)}]"
    return str(v)

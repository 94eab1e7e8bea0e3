"""Memory-module management component: frames, service queue, heat counters."""

from __future__ import annotations

import bisect
from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from .agent import Agent
from .consensus import MigrationCoordinator
from .engine import PRIO_BOUNDARY, Message, MsgKind
from .errors import AccessDenied, UnknownRegion
from .mesh import NodeRef
from .monitoring import AssociativeCounterArray, StatusRecord
from .optimizer import (OptimizerParams, RegionTrigger, propose_balance,
                        propose_locality)

if TYPE_CHECKING:
    from .system import SamSystem


@dataclass
class AllocationRecord:
    region_id: int
    owner: NodeRef | None  # None for pre-fill (background) occupancy
    frames: list[int]
    vpage_base: int
    locked_by: int | None = None

    @property
    def state(self) -> str:
        return "Active" if self.locked_by is None else f"Locked({self.locked_by})"


class MemoryAgent(Agent):
    def __init__(self, node: NodeRef, system: "SamSystem"):
        super().__init__(node, system)
        cfg = self.cfg
        self.page_size = cfg.page_size
        self.n_frames = cfg.n_frames
        self.frames: list[bytearray | None] = [None] * cfg.n_frames
        self.free: list[int] = list(range(cfg.n_frames))
        self.records: dict[int, AllocationRecord] = {}
        self.forwarded: dict[int, NodeRef] = {}
        self.pending: dict[int, list[Message]] = defaultdict(list)
        self.counters = AssociativeCounterArray(cfg.counter_capacity, cfg.threshold)
        self.coord = MigrationCoordinator(self)
        self.vote_timeout = cfg.effective_vote_timeout(self.mesh)
        self.service_cycles = self.mesh.latency_model.mem_service_cycles
        self.busy_until = 0
        self.window_start = 0
        self.busy_in_window = 0
        self.served_in_window = 0
        self.prev_busy = 0
        self.prev_len = 0
        self._next_pid = 0
        self.params = OptimizerParams(self.mesh, cfg.page_size, cfg.cost_factor,
                                      cfg.balance_threshold)
        c = self.coord
        self._handlers = {
            MsgKind.ALLOC_REQ: self.on_alloc,
            MsgKind.READ_REQ: self.on_access,
            MsgKind.WRITE_REQ: self.on_access,
            MsgKind.FREE_REQ: self.on_free,
            MsgKind.STATUS: self.on_status,
            MsgKind.PROPOSE: c.on_propose,
            MsgKind.VOTE: c.on_vote,
            MsgKind.COMMIT: c.on_commit,
            MsgKind.ABORT: c.on_abort,
            MsgKind.MIGRATE_DATA: c.on_migrate_data,
            MsgKind.MIGRATE_ACK: c.on_migrate_ack,
            MsgKind.TABLE_UPDATE_ACK: c.on_table_update_ack,
        }

    def start(self) -> None:
        super().start()
        period = self.cfg.monitor_period
        self.sim.set_timer(self.node, "boundary", period, priority=PRIO_BOUNDARY, background=True)

    # -- frame bookkeeping --------------------------------------------------

    def take_frames(self, n: int) -> list[int]:
        taken, self.free = self.free[:n], self.free[n:]
        for f in taken:
            self.frames[f] = None
        return taken

    def give_frames(self, frames: list[int]) -> None:
        for f in frames:
            self.frames[f] = None
            bisect.insort(self.free, f)

    def install_region(self, region_id: int, owner: NodeRef | None, frames: list[int],
                       vpage_base: int) -> AllocationRecord:
        rec = AllocationRecord(region_id, owner, list(frames), vpage_base)
        self.records[region_id] = rec
        return rec

    def drop_region(self, region_id: int) -> AllocationRecord:
        rec = self.records.pop(region_id)
        self.give_frames(rec.frames)
        self.counters.purge(region_id)
        return rec

    def allocate(self, owner: NodeRef | None, region_id: int, n_pages: int,
                 vpage_base: int) -> tuple[bool, list[int] | str]:
        """First-fit, lowest frame indices first. Returns (granted, frames or reason)."""
        if n_pages < 1:
            raise ValueError("n_pages must be >= 1")
        if region_id in self.records:
            return False, "duplicate"
        if len(self.free) < n_pages:
            return False, "no-space"
        frames = self.take_frames(n_pages)
        self.install_region(region_id, owner, frames, vpage_base)
        return True, frames

    def region_bytes(self, region_id: int) -> bytes:
        rec = self.records[region_id]
        return b"".join(bytes(self.page_size) if self.frames[f] is None else bytes(self.frames[f])
                        for f in rec.frames)

    def used_frames(self) -> int:
        return sum(len(r.frames) for r in self.records.values())

    def reserved_frames(self) -> int:
        return sum(len(fr) for _, fr in self.coord.reservations.values())

    # -- load ---------------------------------------------------------------

    def utilization(self) -> float:
        """Busy fraction over the current partial window plus the previous one."""
        span = (self.sim.now - self.window_start) + self.prev_len
        if span <= 0:
            return 0.0
        return min(1.0, (self.busy_in_window + self.prev_busy) / span)

    def own_record(self) -> StatusRecord:
        return StatusRecord(self.node, len(self.free), self.utilization(), self.sim.now)

    # -- message handlers ---------------------------------------------------

    def on_alloc(self, msg: Message) -> None:
        b = msg.body
        granted, result = self.allocate(msg.src, b["region_id"], b["n_pages"], b["vpage_base"])
        body: dict[str, Any] = {"req": b["req"], "region_id": b["region_id"], "granted": granted}
        if granted:
            body["frames"] = result
        else:
            body["reason"] = result
            body["free"] = len(self.free)
        self.send(MsgKind.ALLOC_RESP, msg.src, body)

    def on_access(self, msg: Message) -> None:
        rid = msg.body["region_id"]
        rec = self.records.get(rid)
        if rec is None:
            self._forward_or_fail(msg)
        elif rec.locked_by is not None:
            self.pending[rid].append(msg)
        else:
            self.enqueue(msg)

    def enqueue(self, msg: Message) -> None:
        start = max(self.sim.now, self.busy_until)
        self.busy_until = start + self.service_cycles
        self.sim.set_timer(self.node, ("serve", msg), self.busy_until)

    def _forward_or_fail(self, msg: Message) -> None:
        rid = msg.body["region_id"]
        dest = self.forwarded.get(rid)
        if dest is None:
            raise UnknownRegion(f"{self.node}: region {rid} unknown")
        self.sim.post_message(Message(msg.kind, self.node, dest, msg.body, msg.payload_bytes))

    def serve(self, msg: Message) -> None:
        b = msg.body
        rid = b["region_id"]
        rec = self.records.get(rid)
        if rec is None:
            self._forward_or_fail(msg)
            return
        if rec.locked_by is not None:
            self.pending[rid].append(msg)
            return
        requester = b["requester"]
        if requester != rec.owner:
            raise AccessDenied(f"{requester} is not the owner of region {rid}")
        frame = rec.frames[b["page"]]
        off = b["offset"]
        if msg.kind is MsgKind.READ_REQ:
            page = self.frames[frame]
            value = 0 if page is None else page[off]
            self.send(MsgKind.READ_RESP, requester, {"req": b["req"], "value": value})
        else:
            page = self.frames[frame]
            if page is None:
                page = self.frames[frame] = bytearray(self.page_size)
            page[off] = b["value"]
            self.send(MsgKind.WRITE_ACK, requester, {"req": b["req"]})
        self.busy_in_window += min(self.service_cycles, self.sim.now - self.window_start)
        self.served_in_window += 1
        self.system.metrics.served += 1
        fired = self.counters.bump(rid)
        if fired is not None and self.system.opt_enabled:
            self.optimize(rec, fired.count)

    def on_free(self, msg: Message) -> None:
        b = msg.body
        rid = b["region_id"]
        rec = self.records.get(rid)
        if rec is None:
            self._forward_or_fail(msg)
            return
        if msg.src != rec.owner:
            raise AccessDenied(f"{msg.src} may not free region {rid}")
        if rec.locked_by is not None:
            self.send(MsgKind.FREE_ACK, msg.src, {"req": b["req"], "ok": False})
            return
        self.system.audit.final_contents[(b["task"], b["handle"])] = self.region_bytes(rid)
        self.drop_region(rid)
        self.send(MsgKind.FREE_ACK, msg.src, {"req": b["req"], "ok": True})

    def release_pending(self, region_id: int, forward_to: NodeRef | None) -> None:
        waiting = self.pending.pop(region_id, [])
        for msg in waiting:
            if forward_to is None:
                self.enqueue(msg)
            else:
                self.sim.post_message(Message(msg.kind, self.node, forward_to, msg.body,
                                              msg.payload_bytes))

    # -- timers -------------------------------------------------------------

    def on_local_timer(self, tag: Any) -> None:
        if tag == "boundary":
            self.on_monitoring_cycle_boundary()
            if not self.sim.stopping:
                self.sim.set_timer(self.node, "boundary", self.sim.now + self.cfg.monitor_period,
                                   priority=PRIO_BOUNDARY, background=True)
            return
        what, arg = tag
        if what == "serve":
            self.serve(arg)
        elif what == "vote_timeout":
            self.coord.on_timeout(arg)
        else:
            raise ValueError(f"unexpected timer {tag!r}")

    def on_monitoring_cycle_boundary(self) -> None:
        self.counters.reset()
        now = self.sim.now
        self.prev_busy = self.busy_in_window
        self.prev_len = now - self.window_start
        self.window_start = now
        self.busy_in_window = 0
        self.served_in_window = 0

    # -- optimization -------------------------------------------------------

    def new_proposition_id(self) -> int:
        self._next_pid += 1
        return self.mesh.linear_index(self.node.coord) * 1_000_000 + self._next_pid

    def projected_count(self, count: int) -> float:
        """Scale a count observed so far in this cycle to a whole monitoring cycle."""
        elapsed = max(1, self.sim.now - self.window_start)
        return count * self.cfg.monitor_period / elapsed

    def optimize(self, rec: AllocationRecord, count: int) -> None:
        kind = self.cfg.optimizer
        if kind == "off" or rec.owner is None:
            return
        if kind == "locality":
            trig = RegionTrigger(rec.region_id, self.projected_count(count), len(rec.frames),
                                 self.node, rec.owner)
            p = propose_locality(trig, self.kb, self.params, self.new_proposition_id())
        else:
            hot = self.counters.hottest()
            target_rec = self.records.get(hot[0]) if hot else None
            if target_rec is None or target_rec.owner is None:
                return
            trig = RegionTrigger(target_rec.region_id, self.projected_count(hot[1]),
                                 len(target_rec.frames), self.node, target_rec.owner)
            p = propose_balance(trig, self.utilization(), self.kb, self.params,
                                self.new_proposition_id())
        if p is None:
            return
        self.system.metrics.n_propositions += 1
        self.coord.start_vote(p)

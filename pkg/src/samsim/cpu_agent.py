"""CPU-side management component acting as an enriched MMU.

Owns the core's virtual address space, finds memory for new regions by
expanding-ring probing, replays the core's traces with one outstanding
request at a time, and applies table updates from committed migrations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from .agent import Agent
from .consensus import owner_vote
from .engine import Message, MsgKind
from .errors import OutOfMemory, PageFault, UnknownRegion
from .mesh import NodeRef
from .workload import Task, TraceRecord, write_value

if TYPE_CHECKING:
    from .system import SamSystem


@dataclass
class PageTableEntry:
    vpage: int
    module: NodeRef
    frame: int
    region_id: int


@dataclass
class RegionHandle:
    handle: int
    region_id: int
    vpage_base: int
    n_pages: int


class CpuAgent(Agent):
    def __init__(self, node: NodeRef, system: "SamSystem", tasks: list[Task] | None = None):
        super().__init__(node, system)
        self.page_size = self.cfg.page_size
        self.tasks = list(tasks or [])
        self.task_index = 0
        self.cursor = 0
        self.page_table: dict[int, PageTableEntry] = {}
        self.regions: dict[int, RegionHandle] = {}  # region_id -> handle info
        self.handles: dict[int, RegionHandle] = {}  # trace handle -> region
        self.freeing: set[int] = set()
        self.applied_updates: set[int] = set()
        self.next_vpage = 0
        self.blocked_on: int | None = None
        self.issued_at = 0
        self.done = not self.tasks
        self.finished_at = 0
        self._req = 0
        self._region_seq = 0
        self._alloc_candidates: list[NodeRef] = []
        self._handlers = {
            MsgKind.ALLOC_RESP: self.on_alloc_resp,
            MsgKind.READ_RESP: self.on_data_resp,
            MsgKind.WRITE_ACK: self.on_data_resp,
            MsgKind.FREE_ACK: self.on_free_ack,
            MsgKind.STATUS: self.on_status,
            MsgKind.PROPOSE: self.on_propose,
            MsgKind.COMMIT: self.on_decision,
            MsgKind.ABORT: self.on_decision,
            MsgKind.TABLE_UPDATE: self.on_table_update,
        }

    def start(self) -> None:
        super().start()
        if self.tasks:
            self.sim.schedule_trace_step(self.node, self.sim.now + self.record.delta)

    @property
    def task(self) -> Task:
        return self.tasks[self.task_index]

    @property
    def record(self) -> TraceRecord:
        return self.task.records[self.cursor]

    # -- address translation --------------------------------------------------

    def translate(self, vaddr: int) -> tuple[NodeRef, int, int]:
        vpage, offset = divmod(vaddr, self.page_size)
        entry = self.page_table.get(vpage)
        if entry is None:
            raise PageFault(f"{self.node}: vaddr {vaddr} (vpage {vpage}) unmapped")
        return entry.module, entry.frame, offset

    def region_module(self, region_id: int) -> NodeRef | None:
        reg = self.regions.get(region_id)
        if reg is None:
            return None
        return self.page_table[reg.vpage_base].module

    def install_region(self, handle: int, region_id: int, module: NodeRef, frames: list[int],
                       vpage_base: int) -> RegionHandle:
        reg = RegionHandle(handle, region_id, vpage_base, len(frames))
        for i, frame in enumerate(frames):
            self.page_table[vpage_base + i] = PageTableEntry(vpage_base + i, module, frame,
                                                             region_id)
        self.regions[region_id] = reg
        self.handles[handle] = reg
        return reg

    def remove_region(self, region_id: int) -> None:
        reg = self.regions.pop(region_id)
        for i in range(reg.n_pages):
            del self.page_table[reg.vpage_base + i]
        del self.handles[reg.handle]
        self.freeing.discard(region_id)

    def apply_table_update(self, pid: int, region_id: int, new_module: NodeRef,
                           new_frames: list[int]) -> bool:
        """Repoint every page of a region; returns False for a duplicate update."""
        if pid in self.applied_updates:
            return False
        reg = self.regions.get(region_id)
        if reg is None:
            raise UnknownRegion(f"{self.node}: table update for unknown region {region_id}")
        if len(new_frames) != reg.n_pages:
            raise UnknownRegion(f"{self.node}: table update size mismatch for {region_id}")
        for i, frame in enumerate(new_frames):
            self.page_table[reg.vpage_base + i] = PageTableEntry(reg.vpage_base + i, new_module,
                                                                 frame, region_id)
        self.applied_updates.add(pid)
        return True

    # -- trace replay -------------------------------------------------------

    def _next_req(self) -> int:
        self._req += 1
        return self._req

    def on_trace_step(self) -> None:
        rec = self.record
        op = rec.op
        self.issued_at = self.sim.now
        if op == "A":
            self._region_seq += 1
            self._alloc_region_id = (
                self.mesh.linear_index(self.node.coord) * 1_000_000 + self._region_seq
            )
            self._alloc_candidates = self.mesh.mems_by_distance(self.node.coord)
            self._alloc_vpage = self.next_vpage
            self._send_alloc()
        elif op in ("R", "W"):
            reg = self.handles[rec.handle]
            vaddr = reg.vpage_base * self.page_size + rec.arg
            module, _frame, offset = self.translate(vaddr)
            page = vaddr // self.page_size - reg.vpage_base
            req = self.blocked_on = self._next_req()
            body = {"req": req, "region_id": reg.region_id, "page": page, "offset": offset,
                    "requester": self.node}
            if op == "W":
                body["value"] = write_value(self.task.uid, self.cursor)
                self.send(MsgKind.WRITE_REQ, module, body, payload_bytes=9)
            else:
                self.send(MsgKind.READ_REQ, module, body)
        elif op == "F":
            reg = self.handles[rec.handle]
            self.freeing.add(reg.region_id)
            self._send_free(reg)
        else:
            self._finish_task()

    def _send_alloc(self) -> None:
        if not self._alloc_candidates:
            raise OutOfMemory(f"{self.node}: no module can hold {self.record.arg} pages")
        module = self._alloc_candidates.pop(0)
        req = self.blocked_on = self._next_req()
        self.send(MsgKind.ALLOC_REQ, module,
                  {"req": req, "region_id": self._alloc_region_id, "n_pages": self.record.arg,
                   "vpage_base": self._alloc_vpage})

    def _send_free(self, reg: RegionHandle) -> None:
        req = self.blocked_on = self._next_req()
        module = self.page_table[reg.vpage_base].module
        self.send(MsgKind.FREE_REQ, module,
                  {"req": req, "region_id": reg.region_id, "task": self.task.uid,
                   "handle": reg.handle})

    def _advance(self) -> None:
        self.blocked_on = None
        self.cursor += 1
        self.sim.schedule_trace_step(self.node, self.sim.now + self.record.delta)

    def _finish_task(self) -> None:
        self.system.metrics.tasks_done += 1
        self.task_index += 1
        self.cursor = 0
        if self.task_index < len(self.tasks):
            self.sim.schedule_trace_step(self.node, self.sim.now + self.record.delta)
        else:
            self.done = True
            self.finished_at = self.sim.now

    def _check_req(self, msg: Message) -> None:
        if msg.body["req"] != self.blocked_on:
            raise RuntimeError(f"{self.node}: unexpected response {msg.kind.value} "
                               f"req={msg.body['req']} (waiting for {self.blocked_on})")

    def on_alloc_resp(self, msg: Message) -> None:
        self._check_req(msg)
        if not msg.body["granted"]:
            self._send_alloc()
            return
        frames = msg.body["frames"]
        self.install_region(self.record.handle, self._alloc_region_id, msg.src, frames,
                            self._alloc_vpage)
        self.next_vpage += len(frames)
        self.system.audit.placements.append(
            (self._alloc_region_id, self.node, msg.src,
             self.mesh.hop_distance(self.node.coord, msg.src.coord))
        )
        self._advance()

    def on_data_resp(self, msg: Message) -> None:
        self._check_req(msg)
        metrics = self.system.metrics
        metrics.n_accesses += 1
        metrics.rt_total += self.sim.now - self.issued_at
        if msg.kind is MsgKind.READ_RESP:
            self.system.audit.reads.append((self.task.uid, self.cursor, msg.body["value"]))
        self._advance()

    def on_free_ack(self, msg: Message) -> None:
        self._check_req(msg)
        reg = self.handles[self.record.handle]
        if not msg.body["ok"]:
            self.system.metrics.free_retries += 1
            self.sim.set_timer(self.node, ("retry_free", reg.handle),
                               self.sim.now + self.cfg.free_retry_cycles)
            return
        self.remove_region(reg.region_id)
        self._advance()

    def on_local_timer(self, tag: Any) -> None:
        what, handle = tag
        if what != "retry_free":
            raise ValueError(f"unexpected timer {tag!r}")
        self._send_free(self.handles[handle])

    # -- consensus participant -----------------------------------------------

    def on_propose(self, msg: Message) -> None:
        p = msg.body["prop"]
        vote, reason = owner_vote(
            region_live=p.region_id in self.regions,
            freeing=p.region_id in self.freeing,
            current_module=self.region_module(p.region_id),
            p=p,
            hop=self.mesh.hop_distance,
        )
        body = {"pid": p.proposition_id, "vote": vote}
        if reason is not None:
            body["reason"] = reason
        self.send(MsgKind.VOTE, msg.src, body)

    def on_decision(self, msg: Message) -> None:
        pass  # the coordinator drives the migration; the owner waits for TableUpdate

    def on_table_update(self, msg: Message) -> None:
        b = msg.body
        if self.apply_table_update(b["pid"], b["region_id"], b["new_module"], b["new_frames"]):
            self.send(MsgKind.TABLE_UPDATE_ACK, msg.src, {"pid": b["pid"]})

"""Zero-latency sequential reference machine for the memory-content oracle.

Replays every task of a schedule one record at a time against flat
per-region byte arrays. There is no mesh, no latency and no migration, so
whatever the simulator reads or leaves behind must match this exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .workload import Scenario, Task, write_value


@dataclass
class ReferenceResult:
    reads: list[tuple[int, int, int]] = field(default_factory=list)  # (task, record, value)
    final_contents: dict[tuple[int, int], bytes] = field(default_factory=dict)


def replay_task(task: Task, page_size: int, out: ReferenceResult) -> None:
    live: dict[int, bytearray] = {}
    for index, rec in enumerate(task.records):
        if rec.op == "A":
            live[rec.handle] = bytearray(rec.arg * page_size)
        elif rec.op == "R":
            out.reads.append((task.uid, index, live[rec.handle][rec.arg]))
        elif rec.op == "W":
            live[rec.handle][rec.arg] = write_value(task.uid, index)
        elif rec.op == "F":
            out.final_contents[(task.uid, rec.handle)] = bytes(live.pop(rec.handle))


def run_reference(scenario: Scenario, page_size: int) -> ReferenceResult:
    out = ReferenceResult()
    for task in scenario.tasks:
        replay_task(task, page_size, out)
    out.reads.sort()
    return out

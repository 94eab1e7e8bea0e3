"""Small builders shared by the scripted-scenario tests."""

from samsim.config import SimConfig
from samsim.mesh import TileCoord
from samsim.system import SamSystem
from samsim.workload import Scenario, Task, TraceRecord

QUIET = dict(prefill_fraction=0.0, monitoring=False)


def records(*lines: str) -> list[TraceRecord]:
    out = []
    for line in lines:
        parts = line.split()
        nums = [int(p) for i, p in enumerate(parts) if i != 1]
        out.append(TraceRecord(nums[0], parts[1], *nums[1:]))
    return out


def system_with(tasks: dict[tuple[int, int], list[list[TraceRecord]]], *, log=None,
                opt=True, **cfg) -> SamSystem:
    config = SimConfig(**{**QUIET, **cfg})
    schedule, uid = {}, 0
    for coord, traces in tasks.items():
        schedule[TileCoord(*coord)] = []
        for recs in traces:
            schedule[TileCoord(*coord)].append(Task(uid, f"t{uid}", recs))
            uid += 1
    return SamSystem(config, Scenario(schedule), opt_enabled=opt, log=log)

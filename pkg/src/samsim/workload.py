"""Trace format, synthetic phased traces and scenario construction.

Trace files are line oriented::

    SAMTRACE v1 <name>
    <delta> A <handle> <n_pages>
    <delta> R <handle> <offset>
    <delta> W <handle> <offset>
    <delta> F <handle>
    <delta> E

``#`` starts a comment line. Handles are trace-local, so any core can replay
any trace.
"""

from __future__ import annotations

import dataclasses
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .errors import ConfigError, TraceFormatError
from .mesh import Mesh, TileCoord

HEADER = "SAMTRACE v1"


class TraceRecord(NamedTuple):
    delta: int
    op: str  # one of A R W F E
    handle: int = 0
    arg: int = 0  # n_pages for A, byte offset for R/W

    def format(self) -> str:
        if self.op == "E":
            return f"{self.delta} E"
        if self.op == "F":
            return f"{self.delta} F {self.handle}"
        return f"{self.delta} {self.op} {self.handle} {self.arg}"


@dataclass(frozen=True)
class TraceSpec:
    n_phases: int
    pages_per_phase: int
    accesses_per_phase: int
    write_ratio: float
    mean_delta: float
    page_size: int = 4096

    def __post_init__(self) -> None:
        if min(self.n_phases, self.pages_per_phase, self.accesses_per_phase) < 1:
            raise ConfigError("trace spec counts must be >= 1")
        if not 0.0 <= self.write_ratio <= 1.0:
            raise ConfigError("write_ratio must lie in [0, 1]")
        if self.mean_delta < 0:
            raise ConfigError("mean_delta must be >= 0")


def _geometric(rng: random.Random, mean: float) -> int:
    """Number of failures before the first success, with the given mean."""
    if mean <= 0:
        return 0
    p = 1.0 / (mean + 1.0)
    u = 1.0 - rng.random()  # in (0, 1]
    if p >= 1.0:  # mean too small to register
        return 0
    return int(math.log(u) / math.log(1.0 - p))


def generate_records(spec: TraceSpec, seed: int) -> list[TraceRecord]:
    rng = random.Random(seed)
    records: list[TraceRecord] = []
    region_bytes = spec.pages_per_phase * spec.page_size
    for phase in range(spec.n_phases):
        handle = phase + 1
        records.append(TraceRecord(_geometric(rng, spec.mean_delta), "A", handle,
                                   spec.pages_per_phase))
        for _ in range(spec.accesses_per_phase):
            op = "W" if rng.random() < spec.write_ratio else "R"
            records.append(TraceRecord(_geometric(rng, spec.mean_delta), op, handle,
                                       rng.randrange(region_bytes)))
        records.append(TraceRecord(_geometric(rng, spec.mean_delta), "F", handle))
    records.append(TraceRecord(0, "E"))
    return records


def format_trace(name: str, records: list[TraceRecord]) -> str:
    return "\n".join([f"{HEADER} {name}"] + [r.format() for r in records]) + "\n"


def generate_trace(spec: TraceSpec, seed: int, name: str = "synthetic") -> str:
    return format_trace(name, generate_records(spec, seed))


def parse_trace(text: str, page_size: int = 4096) -> tuple[str, list[TraceRecord]]:
    """Parse and statically validate a trace; returns (name, records)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith(HEADER):
        raise TraceFormatError(f"missing '{HEADER}' header", 1)
    name = lines[0][len(HEADER):].strip() or "unnamed"
    records: list[TraceRecord] = []
    live: dict[int, int] = {}  # handle -> region bytes
    seen_end = False
    for lineno, raw in enumerate(lines[1:], 2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if seen_end:
            raise TraceFormatError("record after E", lineno)
        parts = line.split()
        try:
            nums = [int(p) for i, p in enumerate(parts) if i != 1]
        except ValueError:
            raise TraceFormatError(f"non-integer field in {line!r}", lineno) from None
        if len(parts) < 2:
            raise TraceFormatError(f"truncated record {line!r}", lineno)
        delta, op = nums[0], parts[1]
        if delta < 0:
            raise TraceFormatError("negative delta", lineno)
        arity = {"A": 4, "R": 4, "W": 4, "F": 3, "E": 2}.get(op)
        if arity is None:
            raise TraceFormatError(f"unknown op {op!r}", lineno)
        if len(parts) != arity:
            raise TraceFormatError(f"op {op} expects {arity - 2} operands", lineno)
        if op == "E":
            seen_end = True
            records.append(TraceRecord(delta, "E"))
            continue
        handle = nums[1]
        if op == "A":
            n_pages = nums[2]
            if handle in live:
                raise TraceFormatError(f"handle {handle} already allocated", lineno)
            if n_pages < 1:
                raise TraceFormatError("allocation of zero pages", lineno)
            live[handle] = n_pages * page_size
            records.append(TraceRecord(delta, "A", handle, n_pages))
        elif handle not in live:
            raise TraceFormatError(f"use of unallocated handle {handle}", lineno)
        elif op == "F":
            del live[handle]
            records.append(TraceRecord(delta, "F", handle))
        else:
            offset = nums[2]
            if not 0 <= offset < live[handle]:
                raise TraceFormatError(f"offset {offset} out of range for handle {handle}", lineno)
            records.append(TraceRecord(delta, op, handle, offset))
    if not seen_end:
        raise TraceFormatError("missing E record", len(lines) + 1)
    return name, records


def write_value(task_uid: int, record_index: int) -> int:
    """Byte stored by a W record; shared with the reference machine."""
    return (task_uid * 131 + record_index * 17 + 1) & 0xFF


# Reference task pool: phased traces with a mix of region sizes and intensities.
# One memory-bound kind plus three compute-bound kinds whose regions see
# only a few dozen accesses per monitoring cycle.
REFERENCE_POOL: dict[str, TraceSpec] = {
    "hot": TraceSpec(n_phases=2, pages_per_phase=2, accesses_per_phase=1500,
                     write_ratio=0.3, mean_delta=10),
    "cold": TraceSpec(n_phases=3, pages_per_phase=1, accesses_per_phase=60,
                      write_ratio=0.3, mean_delta=200),
    "cool": TraceSpec(n_phases=3, pages_per_phase=1, accesses_per_phase=80,
                      write_ratio=0.3, mean_delta=150),
    "chill": TraceSpec(n_phases=4, pages_per_phase=1, accesses_per_phase=40,
                       write_ratio=0.3, mean_delta=300),
}


def trace_seed(seed: int, index: int) -> int:
    """Seed of the index-th trace generated from one base seed."""
    return seed * 1009 + index


def reference_pool(seed: int, page_size: int = 4096) -> list[tuple[str, list[TraceRecord]]]:
    pool = []
    for i, (name, spec) in enumerate(REFERENCE_POOL.items()):
        if spec.page_size != page_size:
            spec = dataclasses.replace(spec, page_size=page_size)
        pool.append((name, generate_records(spec, trace_seed(seed, i))))
    return pool


def load_trace_dir(path: str | Path, page_size: int = 4096) -> list[tuple[str, list[TraceRecord]]]:
    files = sorted(Path(path).glob("*.trace"))
    if not files:
        raise ConfigError(f"no *.trace files in {path}")
    out = []
    for f in files:
        try:
            out.append(parse_trace(f.read_text(), page_size))
        except TraceFormatError as e:
            raise TraceFormatError(f"{f.name}: {e}") from None
    return out


def parse_trace_specs(text: str) -> dict[str, TraceSpec]:
    """Parse a trace-spec file: ``<name> key=value ...`` per line."""
    specs: dict[str, TraceSpec] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, *pairs = line.split()
        kw: dict[str, float] = {}
        for pair in pairs:
            if "=" not in pair:
                raise ConfigError(f"spec line {lineno}: expected key=value, got {pair!r}")
            k, v = pair.split("=", 1)
            kw[k] = float(v) if k in ("write_ratio", "mean_delta") else int(v)
        try:
            specs[name] = TraceSpec(**kw)
        except TypeError as e:
            raise ConfigError(f"spec line {lineno}: {e}") from None
    if not specs:
        raise ConfigError("trace spec file defines no traces")
    return specs


@dataclass
class Task:
    uid: int
    name: str
    records: list[TraceRecord]


@dataclass(frozen=True)
class PrefillBlock:
    """Background occupancy held from the start until ``release_at``."""

    module: TileCoord
    n_pages: int
    release_at: int


@dataclass
class Scenario:
    schedule: dict[TileCoord, list[Task]] = field(default_factory=dict)
    prefill: list[PrefillBlock] = field(default_factory=list)

    @property
    def tasks(self) -> list[Task]:
        return sorted((t for ts in self.schedule.values() for t in ts), key=lambda t: t.uid)


def build_scenario(
    mesh: Mesh,
    pool: list[tuple[str, list[TraceRecord]]],
    n_tasks: int,
    seed: int,
    *,
    n_frames: int,
    prefill_fraction: float = 0.5,
    block_pages: int = 8,
    release_min: int = 5000,
    release_max: int = 60000,
    n_hosts: int = 0,
) -> Scenario:
    """Draw tasks onto CPU tiles and plan a pre-filled memory snapshot.

    Pre-fill occupies ``prefill_fraction`` of all frames, filling whole
    modules in order of their distance to the nearest task-hosting core, so
    new regions start out badly placed. Each pre-fill block is released at
    a seeded cycle, which is what opens up closer placements later on.
    """
    if n_tasks < 1:
        raise ConfigError("n_tasks must be >= 1")
    if not pool:
        raise ConfigError("empty task pool")
    if not 0.0 <= prefill_fraction <= 1.0:
        raise ConfigError(f"infeasible pre-fill fraction {prefill_fraction}")
    rng = random.Random(seed)
    # hosts form a cluster around a seeded anchor core, since applications
    # tend to be bound to one part of the chip
    anchor = mesh.cpus[rng.randrange(len(mesh.cpus))].coord
    cpus = sorted((c.coord for c in mesh.cpus),
                  key=lambda c: (mesh.hop_distance(anchor, c), rng.random()))
    cpus = cpus[:n_hosts or n_tasks]
    rng.shuffle(cpus)
    schedule: dict[TileCoord, list[Task]] = {}
    for uid in range(n_tasks):
        name, records = pool[rng.randrange(len(pool))]
        schedule.setdefault(cpus[uid % len(cpus)], []).append(Task(uid, name, records))

    total = round(prefill_fraction * n_frames * len(mesh.mems))
    # round-robin over hosts, each taking its nearest module not yet taken
    rings = [mesh.mems_by_distance(h) for h in schedule]
    ranked: list = []
    while len(ranked) < len(mesh.mems):
        for ring in rings:
            for mem in ring:
                if mem not in ranked:
                    ranked.append(mem)
                    break
    prefill: list[PrefillBlock] = []
    for mem in ranked:
        if total <= 0:
            break
        room = min(n_frames, total)
        total -= room
        while room > 0:
            n = min(block_pages, room)
            room -= n
            prefill.append(PrefillBlock(mem.coord, n, rng.randint(release_min, release_max)))
    return Scenario(schedule, prefill)

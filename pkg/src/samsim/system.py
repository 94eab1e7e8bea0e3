"""Assemble a mesh of agents from a config and scenario, and run it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, TextIO

from .config import SimConfig
from .cpu_agent import CpuAgent
from .engine import PRIO_PROBE, MsgKind, Simulator
from .memory_agent import MemoryAgent
from .mesh import Mesh, NodeRef, Role, TileCoord
from .workload import (Scenario, TraceRecord, build_scenario, load_trace_dir,
                       reference_pool)

VOTE_KINDS = (MsgKind.PROPOSE, MsgKind.VOTE, MsgKind.COMMIT, MsgKind.ABORT)
MIGRATION_KINDS = (MsgKind.MIGRATE_DATA, MsgKind.MIGRATE_ACK, MsgKind.TABLE_UPDATE,
                   MsgKind.TABLE_UPDATE_ACK)
DATA_KINDS = (MsgKind.ALLOC_REQ, MsgKind.ALLOC_RESP, MsgKind.READ_REQ, MsgKind.READ_RESP,
              MsgKind.WRITE_REQ, MsgKind.WRITE_ACK, MsgKind.FREE_REQ, MsgKind.FREE_ACK)


@dataclass
class Counters:
    n_propositions: int = 0
    n_vote_rounds: int = 0
    n_committed: int = 0
    n_aborted: int = 0
    n_dropped: int = 0
    n_accesses: int = 0
    rt_total: int = 0
    served: int = 0
    free_retries: int = 0
    tasks_done: int = 0
    committed_moves: list = field(default_factory=list)  # (kind, d_before, d_after)


@dataclass
class Audit:
    reads: list[tuple[int, int, int]] = field(default_factory=list)  # (task, record, value)
    final_contents: dict[tuple[int, int], bytes] = field(default_factory=dict)
    placements: list[tuple[int, NodeRef, NodeRef, int]] = field(default_factory=list)


@dataclass(frozen=True)
class RunMetrics:
    makespan: int
    n_propositions: int
    n_committed: int
    n_aborted: int
    n_dropped: int
    msgs_status: int
    msgs_vote_round: int
    msgs_migration: int
    msgs_data: int
    n_accesses: int
    mean_rt_cycles: float
    msg_counts: tuple[tuple[str, int], ...]

    @property
    def msgs_optimization(self) -> int:
        return self.msgs_vote_round + self.msgs_migration


@dataclass
class RunResult:
    metrics: RunMetrics
    audit: Audit
    counters: Counters


def load_pool(cfg: SimConfig) -> list[tuple[str, list[TraceRecord]]]:
    if cfg.traces:
        return load_trace_dir(cfg.traces, cfg.page_size)
    return reference_pool(cfg.seed, cfg.page_size)


def scenario_for(cfg: SimConfig, mesh: Mesh,
                 pool: list[tuple[str, list[TraceRecord]]] | None = None) -> Scenario:
    return build_scenario(
        mesh, pool if pool is not None else load_pool(cfg), cfg.n_tasks, cfg.seed,
        n_frames=cfg.n_frames, prefill_fraction=cfg.prefill_fraction,
        block_pages=cfg.prefill_block_pages, release_min=cfg.prefill_release_min,
        release_max=cfg.prefill_release_max, n_hosts=cfg.n_hosts,
    )


class BackgroundLoad:
    """Pre-fill occupancy: memory held by activity outside the simulated tasks."""

    node = NodeRef(TileCoord(-1, 0), Role.MEM)

    def __init__(self, system: "SamSystem"):
        self.system = system
        for i, block in enumerate(system.scenario.prefill):
            rid = -(i + 1)
            granted, _ = system.mems[block.module].allocate(None, rid, block.n_pages, 0)
            if not granted:
                raise ValueError(f"pre-fill block {i} does not fit on {block.module}")
            system.sim.set_timer(self.node, ("release", block.module, rid), block.release_at,
                                 background=True)

    def on_timer(self, tag) -> None:
        _, module, rid = tag
        self.system.mems[module].drop_region(rid)


class SamSystem:
    """One simulation instance: every tile's agent wired to one event kernel."""

    def __init__(self, cfg: SimConfig, scenario: Scenario | None = None, *,
                 opt_enabled: bool = True, log: TextIO | None = None):
        self.cfg = cfg
        self.mesh = cfg.build_mesh()
        self.sim = Simulator(self.mesh, log)
        self.opt_enabled = opt_enabled and cfg.optimizer != "off"
        self.metrics = Counters()
        self.audit = Audit()
        self.scenario = scenario if scenario is not None else Scenario()
        self.cpus: dict[TileCoord, CpuAgent] = {}
        self.mems: dict[TileCoord, MemoryAgent] = {}
        for node in self.mesh.nodes:
            if node.role is Role.CPU:
                agent = CpuAgent(node, self, self.scenario.schedule.get(node.coord, []))
                self.cpus[node.coord] = agent
            else:
                agent = MemoryAgent(node, self)
                self.mems[node.coord] = agent
            self.sim.register(node, agent)
        self.background = BackgroundLoad(self)
        self.sim.register(self.background.node, self.background)
        self._started = False
        self._n_probes = 0
        self.makespan = 0

    @classmethod
    def from_config(cls, cfg: SimConfig, **kw) -> "SamSystem":
        mesh = cfg.build_mesh()
        return cls(cfg, scenario_for(cfg, mesh), **kw)

    def agent(self, node: NodeRef | TileCoord):
        coord = node.coord if isinstance(node, NodeRef) else node
        return self.cpus.get(coord) or self.mems[coord]

    def add_probe(self, period: int, fn: Callable[["SamSystem"], None]) -> None:
        """Call ``fn`` at every multiple of ``period``, after same-cycle counter resets."""
        system = self

        class _Probe:
            def on_timer(self, tag):
                fn(system)
                if not system.sim.stopping:
                    system.sim.set_timer(probe_node, "probe", system.sim.now + period,
                                         priority=PRIO_PROBE, background=True)

        self._n_probes += 1
        probe_node = NodeRef(TileCoord(-1, -self._n_probes), Role.CPU)
        self.sim.agents[probe_node.coord] = _Probe()
        self.sim.set_timer(probe_node, "probe", period, priority=PRIO_PROBE, background=True)

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        for node in self.mesh.nodes:
            self.agent(node).start()

    def in_flight_propositions(self) -> int:
        return sum(len(m.coord.active) for m in self.mems.values())

    def is_done(self) -> bool:
        return all(c.done for c in self.cpus.values()) and self.in_flight_propositions() == 0

    def run(self) -> RunResult:
        self.start()
        self.sim.run(self.is_done, self.cfg.max_cycles)
        self.makespan = max((c.finished_at for c in self.cpus.values()), default=0)
        return RunResult(self.collect(), self.audit, self.metrics)

    def collect(self) -> RunMetrics:
        counts = self.sim.msg_counts
        m = self.metrics
        return RunMetrics(
            makespan=self.makespan,
            n_propositions=m.n_propositions,
            n_committed=m.n_committed,
            n_aborted=m.n_aborted,
            n_dropped=m.n_dropped,
            msgs_status=counts[MsgKind.STATUS],
            msgs_vote_round=sum(counts[k] for k in VOTE_KINDS),
            msgs_migration=sum(counts[k] for k in MIGRATION_KINDS),
            msgs_data=sum(counts[k] for k in DATA_KINDS),
            n_accesses=m.n_accesses,
            mean_rt_cycles=round(m.rt_total / m.n_accesses, 3) if m.n_accesses else 0.0,
            msg_counts=tuple(sorted((k.value, v) for k, v in counts.items())),
        )


def simulate(cfg: SimConfig, *, opt_enabled: bool = True, scenario: Scenario | None = None,
             log: TextIO | None = None) -> RunResult:
    if scenario is None:
        scenario = scenario_for(cfg, cfg.build_mesh())
    return SamSystem(cfg, scenario, opt_enabled=opt_enabled, log=log).run()

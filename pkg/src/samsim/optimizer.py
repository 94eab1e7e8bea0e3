"""Optimization algorithms: turn a counter trigger plus local knowledge into a proposition.

Both algorithms only look at the proposer's own KnowledgeBase, never at
global state. A proposition is emitted only when its projected benefit
exceeds ``cost_factor`` times the migration cost.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .mesh import Mesh, NodeRef
from .monitoring import KnowledgeBase

CONTROL_BYTES = 8


class PropKind(enum.Enum):
    LOCALITY = "Locality"
    BALANCE = "Balance"


@dataclass(frozen=True)
class Proposition:
    proposition_id: int
    kind: PropKind
    region_id: int
    source: NodeRef
    target: NodeRef
    owner: NodeRef
    n_pages: int
    expected_benefit: float
    migration_cost: int

    def __post_init__(self) -> None:
        if self.source == self.target:
            raise ValueError("proposition source and target must differ")


@dataclass(frozen=True)
class RegionTrigger:
    """A fired counter as seen by the region's current host."""

    region_id: int
    count: float  # accesses projected over one monitoring cycle
    n_pages: int
    source: NodeRef
    owner: NodeRef


@dataclass(frozen=True)
class OptimizerParams:
    mesh: Mesh
    page_size: int = 4096
    cost_factor: float = 1.0
    balance_threshold: float = 0.8


def migration_cost(mesh: Mesh, source: NodeRef, target: NodeRef, owner: NodeRef,
                   n_pages: int, page_size: int) -> int:
    """Page transfer plus the two-message table-update bookkeeping."""
    data = n_pages * mesh.message_latency(source.coord, target.coord, page_size)
    return data + 2 * mesh.message_latency(source.coord, owner.coord, CONTROL_BYTES)


def _yx(node: NodeRef) -> tuple[int, int]:
    return node.coord.y, node.coord.x


def propose_locality(trigger: RegionTrigger, kb: KnowledgeBase, params: OptimizerParams,
                     proposition_id: int) -> Proposition | None:
    mesh = params.mesh
    owner = trigger.owner.coord
    d0 = mesh.hop_distance(owner, trigger.source.coord)
    best: NodeRef | None = None
    best_d = d0
    for rec in kb.memory_records():
        cand = rec.node
        if cand == trigger.source or rec.free_frames < trigger.n_pages:
            continue
        d = mesh.hop_distance(owner, cand.coord)
        if d < best_d or (d == best_d and best is not None and _yx(cand) < _yx(best)):
            best, best_d = cand, d
    if best is None:
        return None
    benefit = trigger.count * (d0 - best_d) * 2 * mesh.latency_model.per_hop_cycles
    cost = migration_cost(mesh, trigger.source, best, trigger.owner, trigger.n_pages,
                          params.page_size)
    if benefit <= params.cost_factor * cost:
        return None
    return Proposition(proposition_id, PropKind.LOCALITY, trigger.region_id, trigger.source,
                       best, trigger.owner, trigger.n_pages, benefit, cost)


def propose_balance(trigger: RegionTrigger, utilization: float, kb: KnowledgeBase,
                    params: OptimizerParams, proposition_id: int) -> Proposition | None:
    """Move the hottest region off an overloaded module toward the idlest known one.

    ``trigger`` must describe the module's hottest region.
    """
    if utilization <= params.balance_threshold:
        return None
    mesh = params.mesh
    best = None
    for rec in kb.memory_records():
        if rec.node == trigger.source or rec.free_frames < trigger.n_pages:
            continue
        if best is None or (rec.utilization, _yx(rec.node)) < (best.utilization, _yx(best.node)):
            best = rec
    if best is None or best.utilization >= utilization:
        return None
    service = mesh.latency_model.mem_service_cycles
    benefit = trigger.count * service * (utilization - best.utilization)
    cost = migration_cost(mesh, trigger.source, best.node, trigger.owner, trigger.n_pages,
                          params.page_size)
    if benefit <= params.cost_factor * cost:
        return None
    return Proposition(proposition_id, PropKind.BALANCE, trigger.region_id, trigger.source,
                       best.node, trigger.owner, trigger.n_pages, benefit, cost)

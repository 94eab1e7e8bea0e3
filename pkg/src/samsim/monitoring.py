"""Status records, knowledge bases and associative counter arrays."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, NamedTuple

from .mesh import NodeRef, Role

STATUS_RECORD_BYTES = 16


@dataclass(frozen=True, slots=True)
class StatusRecord:
    node: NodeRef
    free_frames: int
    utilization: float
    observed_at: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.utilization <= 1.0:
            raise ValueError(f"utilization {self.utilization} outside [0, 1]")


class KnowledgeBase:
    """Freshest known status record per node; never goes back in time."""

    def __init__(self, owner: NodeRef):
        self.owner = owner
        self._records: dict[NodeRef, StatusRecord] = {}

    def merge(self, records: Iterable[StatusRecord]) -> int:
        adopted = 0
        for rec in records:
            if rec.node == self.owner:
                continue
            cur = self._records.get(rec.node)
            if cur is None or rec.observed_at > cur.observed_at:
                self._records[rec.node] = rec
                adopted += 1
        return adopted

    def get(self, node: NodeRef) -> StatusRecord | None:
        return self._records.get(node)

    def relayable(self, now: int, max_age: int) -> list[StatusRecord]:
        return [r for r in self._records.values() if now - r.observed_at <= max_age]

    def memory_records(self) -> list[StatusRecord]:
        return [r for r in self._records.values() if r.node.role is Role.MEM]

    def __contains__(self, node: NodeRef) -> bool:
        return node in self._records

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[StatusRecord]:
        return iter(self._records.values())


class TriggerFired(NamedTuple):
    key: Hashable
    count: int


class AssociativeCounterArray:
    """Bounded hot-key counters with a one-shot threshold trigger per key.

    When full, inserting a new key evicts the entry with the smallest count
    (oldest insertion on ties). Trigger state survives eviction until the
    next reset, so a key fires at most once per monitoring cycle.
    """

    def __init__(self, capacity: int = 16, threshold: int = 45):
        if capacity < 1 or threshold < 1:
            raise ValueError("capacity and threshold must be >= 1")
        self.capacity = capacity
        self.threshold = threshold
        self._counts: dict[Hashable, int] = {}
        self._fired: set[Hashable] = set()
        self.fires = 0

    def bump(self, key: Hashable) -> TriggerFired | None:
        counts = self._counts
        if key in counts:
            counts[key] += 1
        else:
            if len(counts) >= self.capacity:
                # dicts keep insertion order, so min() picks the oldest on ties
                victim = min(counts, key=counts.__getitem__)
                del counts[victim]
            counts[key] = 1
        n = counts[key]
        if n == self.threshold and key not in self._fired:
            self._fired.add(key)
            self.fires += 1
            return TriggerFired(key, n)
        return None

    def reset(self) -> None:
        self._counts.clear()
        self._fired.clear()

    def purge(self, key: Hashable) -> None:
        self._counts.pop(key, None)

    def count(self, key: Hashable) -> int:
        return self._counts.get(key, 0)

    def items(self) -> list[tuple[Hashable, int]]:
        return list(self._counts.items())

    def hottest(self) -> tuple[Hashable, int] | None:
        if not self._counts:
            return None
        key = max(self._counts, key=self._counts.__getitem__)
        return key, self._counts[key]

    def __len__(self) -> int:
        return len(self._counts)

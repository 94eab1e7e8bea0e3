"""2D mesh geometry, tile roles and the message latency model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import ConfigError


class Role(enum.Enum):
    CPU = "C"
    MEM = "M"


class TileCoord(NamedTuple):
    x: int
    y: int

    def __str__(self) -> str:
        return f"({self.x},{self.y})"


class NodeRef(NamedTuple):
    coord: TileCoord
    role: Role

    def __str__(self) -> str:
        return f"{self.role.value}({self.coord.x},{self.coord.y})"


def hop_distance(a: TileCoord, b: TileCoord) -> int:
    return abs(a.x - b.x) + abs(a.y - b.y)


@dataclass(frozen=True)
class LatencyModel:
    base_cycles: int = 10
    per_hop_cycles: int = 2
    per_flit_cycles: int = 1
    flit_bytes: int = 64
    mem_service_cycles: int = 20

    def __post_init__(self) -> None:
        for name in ("base_cycles", "per_flit_cycles", "mem_service_cycles"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.per_hop_cycles < 1:
            raise ConfigError("per_hop_cycles must be >= 1")
        if self.flit_bytes < 1:
            raise ConfigError("flit_bytes must be >= 1")

    def flits(self, payload_bytes: int) -> int:
        return max(1, math.ceil(payload_bytes / self.flit_bytes))

    def latency(self, hops: int, payload_bytes: int) -> int:
        return (
            self.base_cycles
            + self.per_hop_cycles * hops
            + self.per_flit_cycles * self.flits(payload_bytes)
        )


def default_placement(width: int, height: int) -> dict[TileCoord, Role]:
    """Checkerboard: CPU where x+y is even, memory where it is odd."""
    if width < 2 or height < 2:
        raise ConfigError("default placement needs a mesh of at least 2x2")
    return {
        TileCoord(x, y): Role.CPU if (x + y) % 2 == 0 else Role.MEM
        for y in range(height)
        for x in range(width)
    }


def parse_placement(rows: Iterable[str]) -> dict[TileCoord, Role]:
    """Parse a placement map given as rows of ``C``/``M`` characters."""
    placement: dict[TileCoord, Role] = {}
    rows = [r.strip() for r in rows if r.strip()]
    if not rows:
        raise ConfigError("empty placement map")
    width = len(rows[0])
    for y, row in enumerate(rows):
        if len(row) != width:
            raise ConfigError(f"placement row {y} has {len(row)} tiles, expected {width}")
        for x, ch in enumerate(row.upper()):
            try:
                placement[TileCoord(x, y)] = Role(ch)
            except ValueError:
                raise ConfigError(f"bad placement character {ch!r} in row {y}") from None
    return placement


class Mesh:
    """Static mesh: dimensions, tile roles and timing."""

    def __init__(
        self,
        width: int,
        height: int,
        placement: dict[TileCoord, Role] | None = None,
        latency: LatencyModel | None = None,
    ):
        if width < 1 or height < 1:
            raise ConfigError("mesh dimensions must be positive")
        self.width = width
        self.height = height
        self.latency_model = latency or LatencyModel()
        if placement is None:
            placement = default_placement(width, height)
        expected = {TileCoord(x, y) for y in range(height) for x in range(width)}
        if set(placement) != expected:
            raise ConfigError(f"placement does not cover the {width}x{height} mesh exactly")
        self.placement = dict(placement)
        self.nodes = [
            NodeRef(TileCoord(x, y), self.placement[TileCoord(x, y)])
            for y in range(height)
            for x in range(width)
        ]
        self.cpus = [n for n in self.nodes if n.role is Role.CPU]
        self.mems = [n for n in self.nodes if n.role is Role.MEM]
        if not self.cpus or not self.mems:
            raise ConfigError("mesh needs at least one CPU tile and one memory tile")
        self._by_coord = {n.coord: n for n in self.nodes}

    def node_at(self, coord: TileCoord) -> NodeRef:
        return self._by_coord[coord]

    def contains(self, c: TileCoord) -> bool:
        return 0 <= c.x < self.width and 0 <= c.y < self.height

    def linear_index(self, c: TileCoord) -> int:
        return c.y * self.width + c.x

    def check(self, c: TileCoord) -> TileCoord:
        if not self.contains(c):
            raise ConfigError(f"tile {c} outside the {self.width}x{self.height} mesh")
        return c

    def hop_distance(self, a: TileCoord, b: TileCoord) -> int:
        return hop_distance(self.check(a), self.check(b))

    def neighborhood(self, center: TileCoord, radius: int) -> list[TileCoord]:
        """Tiles at 1..radius hops from ``center``, sorted by (y, x)."""
        if radius < 0:
            raise ValueError("radius must be >= 0")
        self.check(center)
        out = []
        for y in range(max(0, center.y - radius), min(self.height, center.y + radius + 1)):
            span = radius - abs(y - center.y)
            for x in range(max(0, center.x - span), min(self.width, center.x + span + 1)):
                if (x, y) != center:
                    out.append(TileCoord(x, y))
        return out

    def message_latency(self, src: TileCoord, dst: TileCoord, payload_bytes: int) -> int:
        return self.latency_model.latency(self.hop_distance(src, dst), payload_bytes)

    def mems_by_distance(self, origin: TileCoord) -> list[NodeRef]:
        """Memory tiles in expanding-ring order, ties by (y, x)."""
        return sorted(
            self.mems,
            key=lambda n: (hop_distance(origin, n.coord), n.coord.y, n.coord.x),
        )

    def max_round_trip(self, payload_bytes: int = 8) -> int:
        corner = self.latency_model.latency(self.width + self.height - 2, payload_bytes)
        return 2 * corner

    def access_round_trip(self, cpu: TileCoord, mem: TileCoord, payload_bytes: int = 8) -> int:
        """Uncontended request/response time including one memory service slot."""
        one_way = self.message_latency(cpu, mem, payload_bytes)
        return 2 * one_way + self.latency_model.mem_service_cycles

    def round_trip_ratio(self) -> float:
        """Farthest over nearest uncontended CPU-to-memory round trip."""
        trips = [
            self.access_round_trip(c.coord, m.coord) for c in self.cpus for m in self.mems
        ]
        return max(trips) / min(trips)

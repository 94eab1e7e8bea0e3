"""Run configuration and the line-oriented ``key = value`` config format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .mesh import LatencyModel, Mesh, parse_placement

OPTIMIZERS = ("locality", "balance", "off")


@dataclass(frozen=True)
class SimConfig:
    # mesh and placement
    mesh_w: int = 6
    mesh_h: int = 6
    placement: tuple[str, ...] = ()
    # latency model
    base_cycles: int = 10
    per_hop_cycles: int = 2
    per_flit_cycles: int = 1
    flit_bytes: int = 64
    mem_service_cycles: int = 20
    # memory modules
    page_size: int = 4096
    n_frames: int = 64
    # self-optimization knobs (the sweep point)
    threshold: int = 45
    emission_period: int = 1000
    monitor_period: int = 5000
    radius: int = 1
    optimizer: str = "locality"
    cost_factor: float = 1.0
    seed: int = 42
    counter_capacity: int = 16
    balance_threshold: float = 0.8
    vote_timeout: int = 0  # 0 = 10 x worst-case mesh round trip
    monitoring: bool = True
    # scenario
    n_tasks: int = 8
    n_hosts: int = 0  # 0 = one host core per task
    prefill_fraction: float = 0.5
    prefill_block_pages: int = 8
    prefill_release_min: int = 5000
    prefill_release_max: int = 60000
    free_retry_cycles: int = 50
    max_cycles: int = 50_000_000
    traces: str = ""

    def __post_init__(self) -> None:
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        positive = ("threshold", "emission_period", "monitor_period", "radius", "page_size",
                    "n_frames", "counter_capacity", "n_tasks", "prefill_block_pages",
                    "free_retry_cycles")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.cost_factor < 0:
            raise ConfigError("cost_factor must be >= 0")
        if not 0.0 <= self.prefill_fraction <= 1.0:
            raise ConfigError("prefill_fraction must lie in [0, 1]")
        if self.prefill_release_max < self.prefill_release_min:
            raise ConfigError("prefill_release_max < prefill_release_min")

    @property
    def latency(self) -> LatencyModel:
        return LatencyModel(self.base_cycles, self.per_hop_cycles, self.per_flit_cycles,
                            self.flit_bytes, self.mem_service_cycles)

    def build_mesh(self) -> Mesh:
        placement = parse_placement(self.placement) if self.placement else None
        if placement is not None:
            h = len(self.placement)
            w = len(self.placement[0].strip())
            if (w, h) != (self.mesh_w, self.mesh_h):
                raise ConfigError(f"placement is {w}x{h}, mesh is {self.mesh_w}x{self.mesh_h}")
        return Mesh(self.mesh_w, self.mesh_h, placement, self.latency)

    def effective_vote_timeout(self, mesh: Mesh) -> int:
        return self.vote_timeout or 10 * mesh.max_round_trip()

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}


def _convert(name: str, raw: str):
    kind = _FIELDS[name].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "on", "yes"):
                return True
            if low in ("0", "false", "off", "no"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config_text(text: str, base: SimConfig | None = None,
                      base_dir: Path | None = None) -> SimConfig:
    values: dict[str, object] = {}
    placement_rows: list[str] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key == "placement":
            placement_rows.extend(raw.split())
            continue
        if key == "traces" and base_dir is not None and raw:
            raw = str((base_dir / raw).resolve())
        values[key] = _convert(key, raw)
    if placement_rows:
        values["placement"] = tuple(placement_rows)
    return dataclasses.replace(base or SimConfig(), **values)


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), base_dir=path.parent)


def dump_config(cfg: SimConfig) -> str:
    lines = []
    for name in _FIELDS:
        v = getattr(cfg, name)
        if name == "placement":
            if v:
                lines.append(f"placement = {' '.join(v)}")
            continue
        if isinstance(v, bool):
            v = "on" if v else "off"
        lines.append(f"{name} = {v}")
    return "\n".join(lines) + "\n"

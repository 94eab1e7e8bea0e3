"""Paired on/off runs, economic efficiency and parameter sweeps."""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import _FIELDS, SimConfig, _convert
from .errors import ConfigError
from .system import RunMetrics, simulate

SWEEP_COLUMNS = (
    "seed", "mesh_w", "mesh_h", "threshold", "emission_period", "monitor_period", "radius",
    "optimizer", "cost_factor", "makespan_on", "makespan_off", "ee_cycles", "n_propositions",
    "n_committed", "n_aborted", "msgs_status", "msgs_vote_round", "msgs_migration",
    "n_accesses", "mean_rt_cycles", "status",
)
POINT_COLUMNS = SWEEP_COLUMNS[:9]
RUN_COLUMNS = POINT_COLUMNS + (
    "opt", "makespan", "n_propositions", "n_committed", "n_aborted", "n_dropped",
    "msgs_status", "msgs_vote_round", "msgs_migration", "msgs_data", "n_accesses",
    "mean_rt_cycles",
)
BASELINES = ("monitoring", "none")

# fields that only matter when the optimizer may act; the off run ignores them
_DECISION_FIELDS = ("threshold", "optimizer", "cost_factor", "counter_capacity",
                    "balance_threshold", "vote_timeout")


@dataclass(frozen=True)
class PairResult:
    on: RunMetrics
    off: RunMetrics


def baseline_config(cfg: SimConfig, baseline: str = "monitoring") -> SimConfig:
    """Config of the unoptimized run, normalized so equal baselines compare equal."""
    if baseline not in BASELINES:
        raise ConfigError(f"baseline must be one of {BASELINES}, got {baseline!r}")
    off = cfg.replace(**{name: _FIELDS[name].default for name in _DECISION_FIELDS})
    if baseline == "none":
        off = off.replace(monitoring=False)
    return off


def run_off(cfg: SimConfig, baseline: str = "monitoring") -> RunMetrics:
    # scenario drawing never reads the decision fields, so the normalized
    # config reproduces the same schedule and pre-fill
    return simulate(baseline_config(cfg, baseline), opt_enabled=False).metrics


def run_pair(cfg: SimConfig, *, baseline: str = "monitoring") -> PairResult:
    """Optimized and unoptimized runs of one scenario.

    By default the unoptimized run keeps monitoring traffic and only
    suppresses optimizer decisions; ``baseline="none"`` switches monitoring
    off as well.
    """
    return PairResult(simulate(cfg).metrics, run_off(cfg, baseline))


def economic_efficiency(pair: PairResult) -> int:
    return pair.off.makespan - pair.on.makespan


def point_fields(cfg: SimConfig) -> dict[str, object]:
    return {name: getattr(cfg, name) for name in POINT_COLUMNS}


def sweep_row(cfg: SimConfig, on: RunMetrics | None, off: RunMetrics | None,
              status: str = "ok") -> dict[str, object]:
    row: dict[str, object] = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update(point_fields(cfg))
    row["status"] = status
    if on is not None and off is not None:
        row.update(
            makespan_on=on.makespan, makespan_off=off.makespan,
            ee_cycles=off.makespan - on.makespan, n_propositions=on.n_propositions,
            n_committed=on.n_committed, n_aborted=on.n_aborted, msgs_status=on.msgs_status,
            msgs_vote_round=on.msgs_vote_round, msgs_migration=on.msgs_migration,
            n_accesses=on.n_accesses, mean_rt_cycles=f"{on.mean_rt_cycles:.3f}",
        )
    return row


def run_row(cfg: SimConfig, opt: bool, m: RunMetrics) -> dict[str, object]:
    row: dict[str, object] = point_fields(cfg)
    row["opt"] = "on" if opt else "off"
    for name in RUN_COLUMNS[len(POINT_COLUMNS) + 1:]:
        row[name] = getattr(m, name)
    row["mean_rt_cycles"] = f"{m.mean_rt_cycles:.3f}"
    return row


def format_csv(columns: tuple[str, ...], rows: list[dict[str, object]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# -- grid ----------------------------------------------------------------------


def parse_grid_text(text: str) -> list[dict[str, object]]:
    """Parse ``key = v1 v2 ...`` lines into the cartesian product of points.

    Axes keep file order and the last axis varies fastest.
    """
    axes: list[tuple[str, list[object]]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"grid line {lineno}: expected 'key = v1 v2 ...'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS or key in ("placement", "traces"):
            raise ConfigError(f"grid line {lineno}: {key!r} cannot be swept")
        if any(k == key for k, _ in axes):
            raise ConfigError(f"grid line {lineno}: duplicate axis {key!r}")
        values = [_convert(key, v) for v in raw.split()]
        if not values:
            raise ConfigError(f"grid line {lineno}: axis {key!r} has no values")
        axes.append((key, values))
    if not axes:
        raise ConfigError("grid defines no axes")
    names = [k for k, _ in axes]
    return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in axes))]


def load_grid(path: str | Path) -> list[dict[str, object]]:
    return parse_grid_text(Path(path).read_text())


def grid_configs(base: SimConfig, grid: list[dict[str, object]]) -> list[SimConfig]:
    if not grid:
        raise ConfigError("empty sweep grid")
    return [base.replace(**point) for point in grid]


# -- sweep ---------------------------------------------------------------------


def _job(job: tuple[str, SimConfig, str]) -> tuple[RunMetrics | None, str]:
    kind, cfg, baseline = job
    try:
        m = simulate(cfg).metrics if kind == "on" else run_off(cfg, baseline)
    except Exception as e:  # a failed point is reported, the sweep carries on
        return None, f"error: {type(e).__name__}: {e}"
    return m, "ok"


def sweep(base: SimConfig, grid: list[dict[str, object]], *, jobs: int = 1,
          baseline: str = "monitoring") -> list[dict[str, object]]:
    """Run every grid point as a paired run; rows come back in grid order.

    Unoptimized runs do not depend on the decision knobs, so points that
    differ only in those share one baseline run.
    """
    try:
        configs = grid_configs(base, grid)
    except ConfigError:
        raise
    off_keys: dict[SimConfig, int] = {}
    point_off: list[int] = []
    for cfg in configs:
        key = baseline_config(cfg, baseline)
        point_off.append(off_keys.setdefault(key, len(off_keys)))
    work = [("off", key, baseline) for key in off_keys] + [("on", cfg, baseline)
                                                          for cfg in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_job, work))
    else:
        results = [_job(w) for w in work]
    offs, ons = results[:len(off_keys)], results[len(off_keys):]
    rows = []
    for cfg, (on, on_status), idx in zip(configs, ons, point_off):
        off, off_status = offs[idx]
        status = on_status if on_status != "ok" else off_status
        rows.append(sweep_row(cfg, on if status == "ok" else None,
                              off if status == "ok" else None, status))
    return rows


def write_sweep_csv(rows: list[dict[str, object]], path: str | Path) -> None:
    Path(path).write_text(format_csv(SWEEP_COLUMNS, rows))

"""Charts and derived columns from a sweep CSV."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ReportError  # noqa: E402
from .experiments import POINT_COLUMNS, SWEEP_COLUMNS  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "samsim"
matplotlib.rcParams["svg.fonttype"] = "none"

NUMERIC = ("seed", "mesh_w", "mesh_h", "threshold", "emission_period", "monitor_period",
           "radius", "makespan_on", "makespan_off", "ee_cycles", "n_propositions",
           "n_committed", "n_aborted", "msgs_status", "msgs_vote_round", "msgs_migration",
           "n_accesses")


def read_sweep_csv(path: str | Path) -> list[dict[str, object]]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        for col in SWEEP_COLUMNS:
            if col not in header:
                raise ReportError(f"missing column {col!r} in {path}")
        rows = [r for r in reader if r["status"] == "ok"]
    if not rows:
        raise ReportError(f"{path} holds no completed sweep points")
    out = []
    for r in rows:
        row: dict[str, object] = dict(r)
        for col in NUMERIC:
            row[col] = int(r[col])
        row["cost_factor"] = float(r["cost_factor"])
        row["mean_rt_cycles"] = float(r["mean_rt_cycles"])
        row["msgs_optimization"] = row["msgs_vote_round"] + row["msgs_migration"]
        out.append(row)
    return out


def _series(rows, x: str, y: str) -> dict[tuple, list[tuple[float, float]]]:
    """One line per combination of the other point columns."""
    keys = [c for c in POINT_COLUMNS if c != x]
    lines: dict[tuple, list[tuple[float, float]]] = defaultdict(list)
    for r in rows:
        lines[tuple((k, r[k]) for k in keys)].append((r[x], r[y]))
    return {k: sorted(v) for k, v in sorted(lines.items(), key=lambda kv: str(kv[0]))}


def _label(key: tuple) -> str:
    varying = [f"{k}={v}" for k, v in key if k in ("emission_period", "monitor_period",
                                                  "radius", "threshold", "optimizer")]
    return ", ".join(varying)


def _chart(path: Path, rows, x: str, y: str, title: str, xlabel: str, ylabel: str) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for key, pts in _series(rows, x, y).items():
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=_label(key))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, linewidth=0.3)
    if len(ax.lines) > 1:
        ax.legend(fontsize="x-small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _distinct(rows, col: str) -> int:
    return len({r[col] for r in rows})


def render_report(csv_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Write SVG charts and a derived-ratio CSV; returns the files written."""
    rows = read_sweep_csv(csv_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    by_threshold = _distinct(rows, "threshold") > 1
    by_emission = _distinct(rows, "emission_period") > 1
    if by_threshold or not by_emission:
        written.append(_chart(out / "committed_vs_threshold.svg", rows, "threshold",
                              "n_committed", "Executed optimizations", "threshold",
                              "committed migrations"))
        written.append(_chart(out / "messages_vs_threshold.svg", rows, "threshold",
                              "msgs_optimization", "Optimization-process messages",
                              "threshold", "messages"))
    if by_emission:
        written.append(_chart(out / "committed_vs_emission.svg", rows, "emission_period",
                              "n_committed", "Executed optimizations", "emission period",
                              "committed migrations"))
        written.append(_chart(out / "messages_vs_emission.svg", rows, "emission_period",
                              "msgs_optimization", "Optimization-process messages",
                              "emission period", "messages"))
    if by_threshold:
        for radius in sorted({r["radius"] for r in rows}):
            subset = [r for r in rows if r["radius"] == radius]
            written.append(_chart(out / f"ee_radius{radius}.svg", subset, "threshold",
                                  "ee_cycles", f"Economic efficiency, neighborhood {radius}",
                                  "threshold", "EE (cycles)"))
    written.append(_write_derived(out / "derived.csv", rows))
    return written


def _write_derived(path: Path, rows) -> Path:
    cols = list(POINT_COLUMNS) + ["makespan_on", "makespan_off", "ee_cycles", "ee_ratio"]
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            ratio = r["ee_cycles"] / r["makespan_off"] if r["makespan_off"] else 0.0
            w.writerow([r[c] for c in cols[:-1]] + [f"{ratio:.6f}"])
    return path

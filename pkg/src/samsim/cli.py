"""Command-line entry point: ``samsim gen-traces|simulate|sweep|report``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import SamError
from .experiments import (RUN_COLUMNS, format_csv, load_grid, run_row, sweep,
                          write_sweep_csv)
from .report import render_report
from .system import simulate
from .workload import generate_trace, parse_trace_specs, trace_seed


def cmd_gen_traces(args: argparse.Namespace) -> int:
    specs = parse_trace_specs(Path(args.spec).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, (name, spec) in enumerate(specs.items()):
        path = out / f"{name}.trace"
        path.write_text(generate_trace(spec, trace_seed(args.seed, i), name))
        print(path)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.traces:
        cfg = cfg.replace(traces=str(Path(args.traces).resolve()))
    opt = args.opt == "on"
    if args.log:
        with open(args.log, "w") as log:
            m = simulate(cfg, opt_enabled=opt, log=log).metrics
    else:
        m = simulate(cfg, opt_enabled=opt).metrics
    Path(args.csv).write_text(format_csv(RUN_COLUMNS, [run_row(cfg, opt, m)]))
    print(f"makespan={m.makespan} committed={m.n_committed} propositions={m.n_propositions}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    rows = sweep(cfg, load_grid(args.grid), jobs=args.jobs, baseline=args.baseline)
    write_sweep_csv(rows, args.csv)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} points, {failed} failed")
    return 1 if failed else 0


def cmd_report(args: argparse.Namespace) -> int:
    for path in render_report(args.csv, args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samsim",
                                     description="Self-aware Memory mesh simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-traces", help="generate synthetic phased traces")
    p.add_argument("--spec", required=True, help="trace spec file (name key=value ...)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_traces)

    p = sub.add_parser("simulate", help="run one simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--traces", help="directory of *.trace files (default: built-in pool)")
    p.add_argument("--opt", choices=("on", "off"), default="on")
    p.add_argument("--csv", required=True)
    p.add_argument("--log", help="write the event log here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run paired on/off simulations over a grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--baseline", choices=("monitoring", "none"), default="monitoring",
                   help="keep monitoring on in the unoptimized run, or switch it off too")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render charts from a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SamError, OSError) as e:
        print(f"samsim: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

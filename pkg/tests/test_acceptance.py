"""Acceptance criteria A1-A10 on the reference scenario.

The reference scenario is the default configuration: 6x6 checkerboard,
64 frames of 4096 B per module, 8 tasks, 50% pre-fill, seed 42 and a
5000-cycle monitoring period. Each test prints one PASS/FAIL line.
"""

import time

import pytest

import races
from helpers import records
from samsim.config import SimConfig
from samsim.engine import MsgKind
from samsim.experiments import SWEEP_COLUMNS, format_csv, parse_grid_text, sweep
from samsim.mesh import TileCoord
from samsim.reference import run_reference
from samsim.system import SamSystem, scenario_for, simulate
from samsim.workload import PrefillBlock, Scenario, Task

REFERENCE = SimConfig()
THRESHOLDS = (5, 15, 25, 35, 45, 55, 65)
EMISSIONS = (250, 500, 1000, 2000, 4000)
THRESHOLD_GRID = "threshold = " + " ".join(map(str, THRESHOLDS)) + "\n"


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"\n{name} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def ints(rows, col):
    return [int(r[col]) for r in rows]


@pytest.fixture(scope="module")
def threshold_sweep():
    start = time.perf_counter()
    rows = sweep(REFERENCE, parse_grid_text(THRESHOLD_GRID))
    return rows, time.perf_counter() - start


def test_a1_commits_fall_with_threshold(threshold_sweep):
    rows, elapsed = threshold_sweep
    commits = ints(rows, "n_committed")
    rises = [(a, b) for a, b in zip(commits, commits[1:]) if b > a]
    shape = not rises or (len(rises) == 1 and rises[0][1] <= 1.10 * rises[0][0])
    ok = shape and elapsed < 120 and all(r["status"] == "ok" for r in rows)
    verdict("A1", ok, f"committed {commits} over T={list(THRESHOLDS)}, "
                      f"{len(rises)} rise(s), sweep took {elapsed:.1f}s")


def test_a2_low_threshold_proposes_twice_as_often(threshold_sweep):
    rows, _ = threshold_sweep
    props = dict(zip(THRESHOLDS, ints(rows, "n_propositions")))
    ok = props[5] >= 2 * props[45]
    verdict("A2", ok, f"propositions T=5: {props[5]}, T=45: {props[45]}")


def test_a3_emission_period_trades_messages_not_commits():
    rows = sweep(REFERENCE, parse_grid_text(
        "threshold = 45\nemission_period = " + " ".join(map(str, EMISSIONS)) + "\n"))
    commits = ints(rows, "n_committed")
    status = ints(rows, "msgs_status")
    spread_ok = min(commits) > 0 and max(commits) / min(commits) <= 1.25
    falling = all(b < a for a, b in zip(status, status[1:]))
    verdict("A3", spread_ok and falling,
            f"committed {commits}, status messages {status} over E={list(EMISSIONS)}")


def test_a4_efficiency_peaks_inside_the_threshold_range(threshold_sweep):
    r1_rows, _ = threshold_sweep
    r1_positive = any(v > 0 for v in ints(r1_rows, "ee_cycles"))
    rows = sweep(REFERENCE.replace(radius=2), parse_grid_text(
        THRESHOLD_GRID + "emission_period = " + " ".join(map(str, EMISSIONS)) + "\n"))
    best = max(rows, key=lambda r: int(r["ee_cycles"]))
    inside = best["threshold"] not in (THRESHOLDS[0], THRESHOLDS[-1])
    verdict("A4", r1_positive and inside,
            f"radius-1 EE {ints(r1_rows, 'ee_cycles')}; best radius-2 EE "
            f"{best['ee_cycles']} at T={best['threshold']}, E={best['emission_period']}")


@pytest.mark.parametrize("threshold", [5, 45])
def test_a5_memory_contents_match_reference_machine(threshold):
    cfg = REFERENCE.replace(threshold=threshold)
    sc = scenario_for(cfg, cfg.build_mesh())
    result = simulate(cfg, scenario=sc)
    ref = run_reference(sc, cfg.page_size)
    reads_ok = sorted(result.audit.reads) == ref.reads
    final_ok = result.audit.final_contents == ref.final_contents
    moved = result.metrics.n_committed > 0
    verdict("A5", reads_ok and final_ok and moved,
            f"T={threshold}: {len(ref.reads)} reads, {len(ref.final_contents)} regions, "
            f"{result.metrics.n_committed} migrations; reads match={reads_ok}, "
            f"final contents match={final_ok}")


@pytest.mark.parametrize("period", [5000, 1000, 10000])
def test_a6_counters_reset_at_cycle_boundaries(period):
    cfg = REFERENCE.replace(monitor_period=period)
    sys = SamSystem(cfg, scenario_for(cfg, cfg.build_mesh()))
    seen = {"boundaries": 0, "dirty": 0, "busy": 0}

    def at_boundary(s):
        seen["boundaries"] += 1
        seen["dirty"] += sum(len(m.counters) + len(m.counters._fired) for m in s.mems.values())

    def midway(s):
        seen["busy"] = max(seen["busy"], sum(len(m.counters) for m in s.mems.values()))

    sys.add_probe(period, at_boundary)
    sys.add_probe(max(1, period // 7), midway)  # shows the check is not vacuous
    sys.run()
    ok = seen["boundaries"] > 0 and seen["dirty"] == 0 and seen["busy"] > 0
    verdict("A6", ok, f"period {period}: {seen['boundaries']} boundaries, "
                      f"{seen['dirty']} leftover entries, up to {seen['busy']} live in between")


def test_a7_parallel_sweep_is_byte_identical(threshold_sweep):
    serial = format_csv(SWEEP_COLUMNS, threshold_sweep[0])
    parallel = format_csv(SWEEP_COLUMNS, sweep(REFERENCE, parse_grid_text(THRESHOLD_GRID),
                                               jobs=4))
    verdict("A7", serial == parallel,
            f"serial and 4-worker CSVs, {len(serial)} bytes, identical={serial == parallel}")


def emission_fanout(radius: int, coord: TileCoord) -> int:
    cfg = SimConfig(prefill_fraction=0.0, radius=radius, emission_period=1000)
    sys = SamSystem(cfg, Scenario({}))
    node = sys.mesh.node_at(coord)
    receivers = set()

    def observe(msg):
        if msg.kind is MsgKind.STATUS and msg.src == node and sys.sim.now < 1000:
            receivers.add(msg.dst)
        return False

    sys.sim.drop_hook = observe
    sys.start()
    while sys.sim.next_time() is not None and sys.sim.next_time() < 1000:
        sys.sim.step()
    return len(receivers)


def test_a8_neighbourhood_sizes_from_emissions():
    got = (emission_fanout(1, TileCoord(2, 2)), emission_fanout(2, TileCoord(2, 2)),
           emission_fanout(1, TileCoord(0, 0)))
    verdict("A8", got == (4, 12, 2),
            f"interior r=1 -> {got[0]}, interior r=2 -> {got[1]}, corner r=1 -> {got[2]}")


def test_a9_consensus_races_stay_safe():
    failures = []
    for name, build in races.ALL_RACES.items():
        run = build()
        checks = {
            "single mapping": not run.violations,
            "exactly-once": races.exactly_once(run),
            "contents": races.matches_reference(run),
            "distance shrinks": races.distances_shrink(run),
        }
        failures += [f"{name}: {k}" for k, v in checks.items() if not v]
    verdict("A9", not failures,
            f"{len(races.ALL_RACES)} races checked"
            + (f"; failed {failures}" if failures else ", all invariants hold"))


def measured_round_trip(module: TileCoord) -> float:
    """Mean response time of one read when only ``module`` has free frames."""
    cfg = SimConfig(prefill_fraction=0.0, monitoring=False, n_frames=4)
    mesh = cfg.build_mesh()
    blocks = [PrefillBlock(m.coord, 4, 10**6) for m in mesh.mems if m.coord != module]
    task = Task(0, "probe", records("0 A 1 1", "0 R 1 0", "0 F 1", "0 E"))
    result = SamSystem(cfg, Scenario({TileCoord(0, 0): [task]}, blocks)).run()
    return result.metrics.mean_rt_cycles


def test_a10_round_trip_ratio():
    mesh = REFERENCE.build_mesh()
    cpu = TileCoord(0, 0)
    ranked = mesh.mems_by_distance(cpu)
    near, far = measured_round_trip(ranked[0].coord), measured_round_trip(ranked[-1].coord)
    ratio = far / near
    ok = ratio >= 1.135 and ratio == pytest.approx(mesh.round_trip_ratio())
    verdict("A10", ok, f"measured {far:.0f}/{near:.0f} cycles = {ratio:.3f} "
                       f"(analytic {mesh.round_trip_ratio():.3f})")

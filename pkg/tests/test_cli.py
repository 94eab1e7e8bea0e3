import csv
import subprocess
import sys

import pytest

from samsim.cli import main
from samsim.experiments import RUN_COLUMNS, SWEEP_COLUMNS
from samsim.workload import parse_trace

SPEC = """\
small n_phases=2 pages_per_phase=1 accesses_per_phase=50 write_ratio=0.4 mean_delta=20
wide n_phases=1 pages_per_phase=3 accesses_per_phase=80 write_ratio=0.2 mean_delta=10
"""


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "traces.spec").write_text(SPEC)
    (tmp_path / "run.cfg").write_text("n_tasks = 4\nthreshold = 25\n")
    (tmp_path / "grid.txt").write_text("threshold = 5 45\n")
    return tmp_path


def test_gen_traces(workdir):
    assert main(["gen-traces", "--spec", str(workdir / "traces.spec"),
                 "--out", str(workdir / "t"), "--seed", "3"]) == 0
    files = sorted(p.name for p in (workdir / "t").iterdir())
    assert files == ["small.trace", "wide.trace"]
    name, recs = parse_trace((workdir / "t" / "wide.trace").read_text())
    assert name == "wide" and sum(r.op in "RW" for r in recs) == 80


def test_gen_traces_is_seeded(workdir):
    for d, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        main(["gen-traces", "--spec", str(workdir / "traces.spec"), "--out", str(workdir / d),
              "--seed", seed])
    read = lambda d: (workdir / d / "small.trace").read_text()  # noqa: E731
    assert read("a") == read("b") != read("c")


def test_simulate_with_traces_and_log(workdir):
    main(["gen-traces", "--spec", str(workdir / "traces.spec"), "--out", str(workdir / "t")])
    out, log = workdir / "run.csv", workdir / "run.log"
    assert main(["simulate", "--config", str(workdir / "run.cfg"), "--traces",
                 str(workdir / "t"), "--opt", "off", "--csv", str(out), "--log", str(log)]) == 0
    rows = read_csv(out)
    assert len(rows) == 1 and list(rows[0]) == list(RUN_COLUMNS)
    assert rows[0]["opt"] == "off" and rows[0]["n_propositions"] == "0"
    assert log.read_text().count("\n") > 100


def test_simulate_is_reproducible(workdir):
    for name in ("a.csv", "b.csv"):
        main(["simulate", "--config", str(workdir / "run.cfg"), "--csv", str(workdir / name)])
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()


def test_sweep_and_report(workdir):
    out = workdir / "sweep.csv"
    assert main(["sweep", "--config", str(workdir / "run.cfg"), "--grid",
                 str(workdir / "grid.txt"), "--csv", str(out), "--jobs", "2"]) == 0
    rows = read_csv(out)
    assert out.read_text().splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert [r["threshold"] for r in rows] == ["5", "45"]
    assert main(["report", "--csv", str(out), "--out", str(workdir / "rep")]) == 0
    assert (workdir / "rep" / "derived.csv").exists()


def test_sweep_with_failure_exits_nonzero(workdir):
    (workdir / "bad.txt").write_text("prefill_fraction = 1.0\n")
    assert main(["sweep", "--config", str(workdir / "run.cfg"), "--grid",
                 str(workdir / "bad.txt"), "--csv", str(workdir / "s.csv")]) == 1
    assert read_csv(workdir / "s.csv")[0]["status"].startswith("error")


@pytest.mark.parametrize("argv", [
    ["simulate", "--config", "/nonexistent.cfg", "--csv", "x.csv"],
    ["report", "--csv", "/nonexistent.csv", "--out", "x"],
])
def test_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err.startswith("samsim: error:")


def test_bad_config_value(workdir, capsys):
    (workdir / "bad.cfg").write_text("threshold = -3\n")
    assert main(["simulate", "--config", str(workdir / "bad.cfg"), "--csv",
                 str(workdir / "x.csv")]) == 2
    assert "threshold" in capsys.readouterr().err


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "samsim.cli", "--help"],
                          capture_output=True, text=True)
    assert done.returncode == 0
    for cmd in ("gen-traces", "simulate", "sweep", "report"):
        assert cmd in done.stdout

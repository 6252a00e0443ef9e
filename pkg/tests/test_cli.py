import csv
import json
import subprocess
import sys

import pytest

from laynet import routing
from laynet.cli import main
from laynet.engine import TRACE_FIELDS

RUN_FILES = {"trace.csv", "shares.csv", "final_graph.csv", "manifest.json"}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_outputs(fixtures_dir, tmp_path):
    assert main(["run", str(fixtures_dir / "minimal.ini"), str(tmp_path)]) == 0
    assert {p.name for p in tmp_path.iterdir()} == RUN_FILES
    rows = read_csv(tmp_path / "trace.csv")
    assert len(rows) == 5 and list(rows[0]) == TRACE_FIELDS
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["seeds"] == [3] and m["invariant_violations"] == []
    assert m["files"] == ["trace.csv", "shares.csv", "final_graph.csv"]
    assert len(m["config_sha256"]) == 64


def test_rerun_is_byte_identical(fixtures_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", str(fixtures_dir / "minimal.ini"), str(out)]) == 0
    for name in ("trace.csv", "shares.csv", "final_graph.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_missing_seed_exits_3(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nepochs=2\n")
    assert main(["run", str(cfg), str(tmp_path / "o")]) == 3
    assert not (tmp_path / "o" / "manifest.json").exists()


@pytest.mark.parametrize("text", ["[run\nseed=1\n", "[run]\nseed=one\n"])
def test_bad_config_exits_2(tmp_path, text):
    cfg = tmp_path / "c.ini"
    cfg.write_text(text)
    assert main(["run", str(cfg), str(tmp_path / "o")]) == 2


def test_unknown_subcommand_exits_2():
    assert main(["explode"]) == 2


def test_sweep_runs_every_pair(fixtures_dir, tmp_path):
    code = main(["sweep", str(fixtures_dir / "minimal.ini"), "--param", "demand.d0",
                 "--values", "1,2,4,8", "--seeds", "3", str(tmp_path)])
    assert code == 0
    traces = sorted(tmp_path.glob("*/seed_*/trace.csv"))
    assert len(traces) == 12
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["seeds"] == [3, 4, 5] and m["values"] == ["1", "2", "4", "8"]
    rows = read_csv(tmp_path / "curves.csv")
    assert [r["value"] for r in rows] == ["1", "2", "4", "8"]
    assert all(r["seeds"] == "3" for r in rows)


def test_sweep_parallel_matches_serial(fixtures_dir, tmp_path):
    args = ["sweep", str(fixtures_dir / "minimal.ini"), "--param", "demand.d0", "--values", "1,3",
            "--seeds", "2"]
    assert main(args + [str(tmp_path / "s")]) == 0
    assert main(args + ["--jobs", "2", str(tmp_path / "p")]) == 0
    assert (tmp_path / "s" / "curves.csv").read_bytes() == (tmp_path / "p" / "curves.csv").read_bytes()


@pytest.mark.parametrize("extra", [["--param", "demand.d0", "--values", ""],
                                   ["--param", "demand.bogus", "--values", "1"],
                                   ["--param", "demand.d0", "--values", "1", "--seeds", "0"]])
def test_sweep_invalid_exits_3(fixtures_dir, tmp_path, extra):
    assert main(["sweep", str(fixtures_dir / "minimal.ini"), *extra, str(tmp_path)]) == 3


def test_oracle_check_passes():
    assert main(["oracle-check"]) == 0


def test_oracle_check_node_limit():
    assert main(["oracle-check", "--max-nodes", "11"]) == 3


def test_oracle_check_catches_broken_routing(monkeypatch, capsys):
    # Negative control: a cost function that ignores the proportional fee
    monkeypatch.setattr(routing, "hop_weight", 
                        lambda g, hop, amount: g.channels[hop[0]].fee_base(hop[1]))
    assert main(["oracle-check", "--instances", "200"]) == 1
    out = capsys.readouterr().out
    first = json.loads(out.splitlines()[0])
    assert first["status"] == "mismatch" and first["kind"] == "routing"
    assert "# node_count=" in out


def test_curves_are_monotone(fixtures_dir, tmp_path):
    assert main(["curves", str(fixtures_dir / "minimal.ini"), str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "curves.csv")
    assert len(rows) == 20
    btc = [float(r["cost_btc"]) for r in rows]
    assert all(a <= b for a, b in zip(btc, btc[1:]))
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert "crossover_demand" in m


def test_regen_fixtures_reproduces(fixtures_dir, tmp_path):
    assert main(["regen-fixtures", str(tmp_path)]) == 0
    for name in ("rebalance_gap.csv", "derived.json"):
        assert (tmp_path / name).read_bytes() == (fixtures_dir / name).read_bytes()


def test_module_entry_point(fixtures_dir, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "laynet", "run", str(fixtures_dir / "minimal.ini"),
                           str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["status"] == "ok"

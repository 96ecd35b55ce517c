import csv
import io
import json
import subprocess
import sys

import pytest

from consensus_lab.cli import main


@pytest.fixture(autouse=True)
def _clean(monkeypatch, tmp_path):
    monkeypatch.delenv("CONSENSUS_LAB_SEED", raising=False)
    monkeypatch.chdir(tmp_path)


def _json(capsys, argv):
    code = main(argv + ["--format", "json", "--quiet"])
    return code, json.loads(capsys.readouterr().out)


def test_run_swap_solo(capsys):
    code = main(["run", "--protocol", "swap", "--n", "3", "--inputs", "2,0,1", "--sched", "solo:0"])
    out = capsys.readouterr().out
    assert code == 0
    assert "decided: [2]" in out


def test_run_maxreg_random(capsys):
    code, doc = _json(capsys, ["run", "-p", "maxreg", "--n", "4", "--inputs", "1,1,1,1", "--sched", "random", "--seed", "7"])
    assert code == 0
    assert set(doc["stats"]["decided"]) == {1}
    assert doc["schedule"] == "random:7"


def test_unknown_protocol_lists_registry(capsys):
    code = main(["run", "--protocol", "paxos", "--inputs", "0,1,2"])
    err = capsys.readouterr().err
    assert code == 2
    assert "swap" in err and "maxreg" in err and "tas-reset" in err


@pytest.mark.parametrize("argv", [
    ["run", "--protocol", "swap", "--n", "3"],
    ["run", "--protocol", "swap", "--n", "3", "--inputs", "0,1"],
    ["run", "--protocol", "swap", "--n", "3", "--inputs", "0,1,7"],
    ["run", "--protocol", "swap", "--n", "3", "--inputs", "0,1,2", "--sched", "solo:5"],
    ["run", "--protocol", "swap", "--n", "3", "--inputs", "0,1,2", "--sched", "whenever"],
    ["run", "--protocol", "swap", "--n", "1", "--inputs", "0"],
    ["table", "--n-range", "x"],
    ["replay", "missing.trace"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_budget_exhausted_exits_3(capsys):
    code = main(["run", "-p", "swap", "--n", "3", "--inputs", "0,1,2", "--budget", "0", "-q"])
    assert code == 3


def test_verify_faa_tas(capsys):
    code, doc = _json(capsys, ["verify", "-p", "faa-tas", "--n", "3", "--depth", "6"])
    assert code == 0
    assert doc["outcome"] == "ok"
    assert doc["stats"]["vectors"] == 8


def test_verify_broken_writes_witness_and_replays(tmp_path, capsys):
    code = main(["verify", "-p", "broken", "--n", "2", "--depth", "4", "-q", "--witness", "w.trace"])
    assert code == 1
    assert "agreement-violation" in capsys.readouterr().out
    text = (tmp_path / "w.trace").read_text()
    assert len(text.strip().splitlines()) == 3  # header + 2 steps
    code = main(["replay", "w.trace"])
    out = capsys.readouterr().out
    assert code == 1  # the replayed run is again a violation
    assert "identical" in out and "agreement-violation" in out


def test_verify_node_cap_exits_3(capsys):
    assert main(["verify", "-p", "swap", "--n", "3", "--inputs", "0,1,2", "--depth", "30", "--node-cap", "20", "-q"]) == 3


def test_replay_of_saved_run(tmp_path, capsys):
    assert main(["run", "-p", "buffer", "--n", "3", "--l", "2", "--inputs", "0,1,2", "--trace", "t.trace", "-q"]) == 0
    capsys.readouterr()
    assert main(["replay", "t.trace"]) == 0
    assert "identical" in capsys.readouterr().out


def test_replay_detects_tampering(tmp_path, capsys):
    main(["run", "-p", "swap", "--n", "3", "--inputs", "0,1,2", "--trace", "t.trace", "-q"])
    lines = (tmp_path / "t.trace").read_text().splitlines()
    fields = lines[3].split("\t")
    fields[4] = json.dumps(123456)
    lines[3] = "\t".join(fields)
    (tmp_path / "t.trace").write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["replay", "t.trace"]) == 1
    assert "diverged" in capsys.readouterr().out


def test_seed_precedence(tmp_path, monkeypatch, capsys):
    base = ["run", "-p", "swap", "--n", "3", "--inputs", "0,1,2"]
    _, doc = _json(capsys, base)
    assert doc["schedule"] == "random:0"
    monkeypatch.setenv("CONSENSUS_LAB_SEED", "11")
    _, doc = _json(capsys, base)
    assert doc["schedule"] == "random:11"
    (tmp_path / "c.json").write_text(json.dumps({"seed": 5, "n": 3}))
    _, doc = _json(capsys, base + ["--config", "c.json"])
    assert doc["schedule"] == "random:5"
    _, doc = _json(capsys, base + ["--config", "c.json", "--seed", "8"])
    assert doc["schedule"] == "random:8"


def test_config_file_supplies_protocol(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps({"protocol": "maxreg", "n": 2, "inputs": "1,0", "sched": "solo:1"}))
    code, doc = _json(capsys, ["run", "--config", "c.json"])
    assert code == 0 and doc["stats"]["decided"] == [None, 0]
    (tmp_path / "bad.json").write_text("[1, 2]")
    assert main(["run", "--config", "bad.json"]) == 2


def test_bad_env_seed_is_usage_error(monkeypatch, capsys):
    monkeypatch.setenv("CONSENSUS_LAB_SEED", "abc")
    assert main(["run", "-p", "swap", "--n", "3", "--inputs", "0,1,2"]) == 2


def test_json_and_csv_agree(capsys):
    base = ["run", "-p", "racing-multiply", "--n", "3", "--inputs", "0,1,2", "--seed", "3", "-q"]
    main(base + ["--format", "json"])
    doc = json.loads(capsys.readouterr().out)
    main(base + ["--format", "csv"])
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 1
    row = rows[0]
    assert row["outcome"] == doc["outcome"]
    assert int(row["stats.steps"]) == doc["stats"]["steps"]
    assert json.loads(row["stats.decided"]) == doc["stats"]["decided"]
    assert json.loads(row["inputs"]) == doc["inputs"]


def test_output_file(tmp_path, capsys):
    main(["run", "-p", "faa-tas", "--n", "3", "--inputs", "0,1,1", "--format", "json", "-o", "r.json"])
    assert capsys.readouterr().out == ""
    assert json.loads((tmp_path / "r.json").read_text())["outcome"] == "ok"


def test_sweep_command(capsys):
    code, doc = _json(capsys, ["sweep", "-p", "maxreg", "--n", "3", "--runs", "200"])
    assert code == 0
    assert doc["stats"]["runs"] == 200
    code, doc = _json(capsys, ["sweep", "-p", "maxreg", "--n", "3", "--runs", "200", "--workers", "2"])
    assert code == 0 and doc["stats"]["runs"] == 200


def test_sweep_broken(capsys):
    assert main(["sweep", "-p", "broken", "--n", "3", "--runs", "10", "-q", "--witness", "s.trace"]) == 1


def test_table_rows(capsys):
    code, doc = _json(capsys, ["table", "--protocols", "maxreg,buffer,swap", "--n-range", "2..5", "--l-values", "2", "--seeds", "3"])
    assert code == 0 and doc["all_match"]
    rows = {(r["protocol"], r["n"]): r for r in doc["rows"]}
    assert rows[("maxreg", 4)]["measured"] == 2
    assert rows[("buffer", 5)]["measured"] == 3
    assert rows[("swap", 5)]["measured"] == 4


def test_table_csv(capsys):
    main(["table", "--protocols", "increment-logn", "--n-range", "2,4", "--seeds", "3", "--format", "csv", "-q"])
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [int(r["measured"]) for r in rows] == [2, 6]
    assert all(r["match"] == "True" for r in rows)


def test_progress_goes_to_stderr(capsys):
    main(["verify", "-p", "faa-tas", "--n", "2", "--depth", "3"])
    captured = capsys.readouterr()
    assert "verify faa-tas" in captured.err
    assert "verify faa-tas" not in captured.out


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "consensus_lab", "run", "-p", "swap", "--n", "3", "--inputs", "2,0,1", "--sched", "solo:0"],
        capture_output=True, text=True,
    )
    assert r.returncode == 0
    assert "decided: [2]" in r.stdout

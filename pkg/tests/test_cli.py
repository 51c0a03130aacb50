import json
import subprocess
import sys
from fractions import Fraction

import pytest

from qclab.cli import dumps, jsonable, main

AND2 = "00 0\n01 0\n10 0\n11 1\n"
XOR2 = "00 0\n01 1\n10 1\n11 0\n"
XOR_PAIR = "0 00 1/2\n0 11 1/2\n1 01 1/2\n1 10 1/2\n"


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, text in (("and2", AND2), ("xor2", XOR2), ("pair", XOR_PAIR)):
        paths[name] = tmp_path / f"{name}.txt"
        paths[name].write_text(text)
    paths["bs"] = tmp_path / "bs.json"
    paths["bs"].write_text(json.dumps({"toy": "dictator", "K": 4, "k": 1, "L": 1, "tau": "1",
                                       "settled_value": 5, "unsettled_floor": 1, "runs": 2}))
    paths["pl"] = tmp_path / "pl.json"
    paths["pl"].write_text(json.dumps({"toy": "xor2"}))
    return {k: str(v) for k, v in paths.items()}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out), out


def test_jsonable_formats():
    assert jsonable(Fraction(1, 3)) == "1/3"
    assert jsonable(Fraction(2)) == "2/1"
    assert jsonable(1 / 3) == 0.333333333333
    assert list(json.loads(dumps({"b": 1, "a": 2}))) == ["b", "a"]


def test_measures(capsys, files):
    code, rec, _ = run(capsys, "measures", "--function", files["and2"], "--measures", "dt,bs,fbs")
    assert code == 0
    assert [r["measure"] for r in rec["records"]] == ["dt", "bs", "fbs"]
    assert [r["value"] for r in rec["records"]] == [2, 2, "2/1"]
    assert list(rec["records"][0]) == ["measure", "f", "params", "value"]


def test_parse_error_names_file_and_line(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("00 0\n0x 1\n")
    code, rec, _ = run(capsys, "measures", "--function", str(bad))
    assert code == 2
    assert rec["error"] == "ParseError" and rec["message"].startswith(f"{bad}:2:")


def test_usage_errors(capsys):
    assert run(capsys, "separation", "--n", "2")[0] == 2
    assert run(capsys, "bootstrap-sim", "--config", "x", "--seed", "-1")[0] == 2
    assert run(capsys, "verify", "nosuch")[0] == 2


def test_cap_exit(capsys, files, monkeypatch):
    monkeypatch.setenv("QCLAB_CAP", "1")
    code, rec, _ = run(capsys, "measures", "--function", files["and2"])
    assert code == 3 and rec["error"] == "CapExceeded"


def test_pipeline_and_fault(capsys, files):
    code, rec, _ = run(capsys, "pipeline", "--config", files["pl"])
    assert code == 0 and rec["command"] == "pipeline"
    assert rec["corr"]["error0"] == "0/1"
    for stage in ("single", "tester"):
        code, rec, _ = run(capsys, "pipeline", "--config", files["pl"], "--fault", stage)
        assert code == 4


def test_bootstrap_sim_deterministic(capsys, files, tmp_path):
    t1, t2 = tmp_path / "t1", tmp_path / "t2"
    _, a, out_a = run(capsys, "bootstrap-sim", "--config", files["bs"], "--seed", "42", "--trace", str(t1))
    _, b, out_b = run(capsys, "bootstrap-sim", "--config", files["bs"], "--seed", "42", "--trace", str(t2))
    assert out_a == out_b and t1.read_text() == t2.read_text()
    assert a["safe_constant"] == "1/12"
    rows = [r.split() for r in t1.read_text().splitlines() if not r.startswith("#")]
    assert all(len(r) == 6 for r in rows)
    assert rows[0] == ["0"] * 6
    _, c, _ = run(capsys, "bootstrap-sim", "--config", files["bs"], "--seed", "43")
    assert [r["input"] for r in c["runs"]] != [r["input"] for r in a["runs"]]


def test_bootstrap_sim_bad_config(capsys, tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert run(capsys, "bootstrap-sim", "--config", str(p), "--seed", "1")[0] == 2


def test_compose(capsys, files):
    code, rec, _ = run(capsys, "compose", "--outer", files["and2"], "--inner", files["xor2"], "--pair", files["pair"])
    assert code == 0
    assert list(rec)[:3] == ["command", "fbs", "vacuous"]
    assert rec["fbs"] == "2/1" and rec["truncation"]["limit"] == 10
    assert rec["bicorr"]["cost"] == 2 and rec["ratio"] == "1/1"


def test_verify(capsys):
    code, rec, _ = run(capsys, "verify", "helper", "--grid", "10")
    assert code == 0 and rec["ok"] is True


def test_separation(capsys):
    code, rec, _ = run(capsys, "separation", "--n", "5")
    assert code == 0
    assert rec["dt_third"] == 4 and rec["corr_cost"] == 42 and rec["corr_cost_n_plus_2"] == 42
    assert rec["verdict"] == "separated"
    sel = rec["selection"]
    assert sel["corr_cost"] == 1855 and sel["amplified_ok"] is True
    assert sel["bias_max"] == "1/200" and sel["certified"] is True


def test_console_script():
    p = subprocess.run([sys.executable, "-m", "qclab.cli", "separation", "--n", "1"], capture_output=True, text=True)
    assert p.returncode == 2
    assert json.loads(p.stdout)["error"] == "UsageError"

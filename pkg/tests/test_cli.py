import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from hardy_ladder.behavior import behavior_from_json, uniform_behavior
from hardy_ladder.bounds import extremal_ns_box
from hardy_ladder.cli import main, run_command
from hardy_ladder.quantum import born_behavior

LISTED_L = [0.207106, 0.299038, 0.347759, 0.377641, 0.397777]


def run_json(*argv):
    code, out = run_command([*argv, "--no-timestamp"])
    return code, json.loads(out)


def test_bounds_csv():
    code, out = run_command(["bounds", "--k-max", "5", "--format", "csv"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 5
    # printed values are truncated, CSV rounds: allow half a unit in the 6th place on top
    for row, ref in zip(rows, LISTED_L):
        assert abs(float(row["l_k"]) - ref) <= 1.5e-6


def test_bounds_json():
    code, d = run_json("bounds", "--k-max", "5")
    assert code == 0
    assert [r["l_k"] for r in d["records"]] == pytest.approx(LISTED_L, abs=1e-6)
    assert d["records"][0]["tsirelson"] == pytest.approx(2 * 2**0.5)


def test_fig1_default_csv():
    code, out = run_command(["fig1", "--k-max", "4"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["K"]) for r in rows] == [1, 2, 3, 4]
    assert rows[0]["GPT_limit"] == "0.500000"
    assert rows[0]["LR"] == "2" and rows[0]["Algebraic"] == "4"


def test_fig1_threads_env(monkeypatch):
    base = run_command(["fig1", "--k-max", "9"])
    monkeypatch.setenv("HARDY_CHAIN_THREADS", "3")
    assert run_command(["fig1", "--k-max", "9"]) == base
    monkeypatch.setenv("HARDY_CHAIN_THREADS", "zero")
    assert run_command(["fig1", "--k-max", "9"])[0] == 2


def test_verify_quantum_passes():
    code, d = run_json("verify", "--x", "0.5", "--k", "1")
    assert code == 0
    assert d["passed"] is True
    assert d["residuals"]["cere3"] <= 1e-9
    assert d["residuals"]["eq8"] <= 1e-9


def test_verify_input_file(tmp_path):
    f = tmp_path / "box.json"
    f.write_text(extremal_ns_box(2).to_json())
    code, d = run_json("verify", "--input", str(f))
    assert code == 0
    assert d["hardy"]["p_k"] == 0.5


def test_verify_failure_exit_1(tmp_path):
    # uniform: NS but the Hardy zeros fail
    f = tmp_path / "u.json"
    f.write_text(uniform_behavior(1).to_json())
    code, d = run_json("verify", "--input", str(f))
    assert code == 1
    assert d["checks"]["ns"] is True
    assert d["checks"]["hardy_zeros"] is False


def test_verify_bad_table_is_computation_error(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({"k": 1, "table": [0.5] * 16}))
    code, out = run_command(["verify", "--input", str(f)])
    assert code == 1
    assert json.loads(out)["error"]["type"] == "not_normalized"


def test_verify_missing_file_is_usage(tmp_path):
    code, out = run_command(["verify", "--input", str(tmp_path / "nope.json")])
    assert code == 2


def test_prove():
    code, d = run_json("prove", "--k", "2")
    assert code == 0
    assert d["verified"] is True
    assert d["elimination_verified"] is True
    assert len(d["terms"]) == 12
    assert all(t["multiplier"] == "1/2" for t in d["terms"])


@pytest.mark.parametrize(
    "argv",
    [
        ["prove", "--k", "0"],
        ["lr", "--k", "-3"],
        ["quantum", "--x", "1.0", "--k", "2"],
        ["simulate", "--x", "0.5", "--k", "1", "--shots", "0", "--seed", "1"],
        ["simulate", "--x", "0.5", "--k", "1", "--shots", "10", "--seed", "-1"],
        ["bounds"],
        ["nonsense"],
        [],
        ["verify", "--x", "0.5"],
    ],
)
def test_usage_errors(argv):
    code, out = run_command(argv)
    assert code == 2
    assert json.loads(out)["error"]["type"] == "usage"


def test_usage_error_names_flag():
    _, out = run_command(["prove", "--k", "0"])
    assert "--k" in json.loads(out)["error"]["message"]


def test_lr():
    code, d = run_json("lr", "--k", "3")
    assert code == 0
    assert d["max_chsh"] == 6
    assert d["strategies"] == 256


def test_lr_budget_is_exit_1():
    code, out = run_command(["lr", "--k", "13"])
    assert code == 1
    assert json.loads(out)["error"]["type"] == "budget_exceeded"


def test_quantum_full_table_roundtrip():
    code, d = run_json("quantum", "--x", "0.3", "--k", "3", "--full-table")
    assert code == 0
    b = behavior_from_json(d["behavior"])
    assert np.max(np.abs(b.table - born_behavior(0.3, 3).table)) <= 1e-15
    assert d["closed_form"]["pKK_pp"] == pytest.approx(d["hardy"]["p_k"], abs=1e-12)


def test_simulate_deterministic_output():
    argv = ["simulate", "--x", "0.5", "--k", "2", "--shots", "5000", "--seed", "99", "--counts", "--no-timestamp"]
    a, b = run_command(argv), run_command(argv)
    assert a == b
    d = json.loads(a[1])
    assert d["counts"]["seed"] == 99
    assert len(d["counts"]["counts"]) == 36


def test_timestamp_only_difference():
    code, out = run_command(["bounds", "--k-max", "2"])
    d = json.loads(out)
    assert "generated_at" in d
    del d["generated_at"]
    assert d == run_json("bounds", "--k-max", "2")[1]


def test_simulate_csv():
    code, out = run_command(["simulate", "--x", "0.5", "--k", "1", "--shots", "100", "--seed", "1",
                             "--format", "csv", "--precision", "3"])
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["quantity", "estimate", "std_error"]
    assert rows[2][0] == "chsh_k"
    assert len(rows[2][1].split(".")[1]) == 3


def test_output_file(tmp_path):
    out = tmp_path / "fig.csv"
    assert main(["fig1", "--k-max", "3", "--output", str(out)]) == 0
    assert out.read_text().startswith("K,L_K")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hardy_ladder", "prove", "--k", "0"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "--k" in proc.stderr

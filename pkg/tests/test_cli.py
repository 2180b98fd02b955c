import json
import subprocess
import sys
from pathlib import Path

import pytest

from laxforge.cli import main

GOLDEN = Path(__file__).parent / "golden"


def run(capsysbinary, *argv):
    code = main(list(argv))
    out = capsysbinary.readouterr()
    return code, out.out, out.err.decode()


def test_reduce_all_passes_and_flags_census(capsysbinary):
    code, out, _ = run(capsysbinary, "reduce", "--all", "--n", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["passed"] and doc["records"]
    c = doc["sections"]["census"]
    assert c["non_isospectral_count"] == 5 and c["discrepancy"] is True
    assert doc["sections"]["II.2"]["flags"][0]["id"] == "prefactor-sign"


def test_same_seed_same_bytes(capsysbinary):
    a = run(capsysbinary, "reduce", "--case", "I.2", "--n", "2", "--seed", "3")[1]
    b = run(capsysbinary, "reduce", "--case", "I.2", "--n", "2", "--seed", "3")[1]
    assert a == b
    c = run(capsysbinary, "reduce", "--case", "I.2", "--n", "2", "--seed", "4")[1]
    assert json.loads(c)["run_id"] != json.loads(a)["run_id"]


def test_seed_from_environment(capsysbinary, monkeypatch):
    monkeypatch.setenv("LAXFORGE_SEED", "11")
    doc = json.loads(run(capsysbinary, "verify-lax", "--n", "1")[1])
    assert doc["params"]["seed"] == 11
    doc = json.loads(run(capsysbinary, "verify-lax", "--n", "1", "--seed", "5")[1])
    assert doc["params"]["seed"] == 5
    monkeypatch.setenv("LAXFORGE_SEED", "abc")
    assert run(capsysbinary, "verify-lax")[0] == 2


@pytest.mark.parametrize("argv,name", [
    (["reduce", "--case", "II.2", "--n", "1", "--seed", "42", "--format", "text"], "reduce_II2_n1.txt"),
    (["reduce", "--case", "II.2", "--n", "1", "--seed", "42", "--format", "latex"], "reduce_II2_n1.tex"),
    (["solve-lambda", "--case", "I.3", "--n", "2", "--seed", "42", "--format", "text"], "solve_I3_n2.txt"),
])
def test_golden_renderings(capsysbinary, argv, name):
    code, out, _ = run(capsysbinary, *argv)
    assert code == 0
    assert out == (GOLDEN / name).read_bytes()


def test_timing_only_on_request(capsysbinary):
    out = run(capsysbinary, "solve-lambda", "--case", "III.1")[1]
    assert "wall_time" not in out.decode()
    out = run(capsysbinary, "solve-lambda", "--case", "III.1", "--timing")[1]
    assert "wall_time" in out.decode()


def test_out_file(capsysbinary, tmp_path):
    target = tmp_path / "r.json"
    code, out, _ = run(capsysbinary, "ops-check", "--n", "2", "--out", str(target))
    assert code == 0 and out == b""
    doc = json.loads(target.read_text())
    assert doc["command"] == "ops-check" and doc["passed"]


@pytest.mark.parametrize("argv", [
    ["reduce", "--case", "IV.1"],
    ["reduce", "--n", "0", "--all"],
    ["reduce", "--n", "5", "--all"],
    ["reduce"],
    ["reduce", "--case", "I.1", "--all"],
    ["solve-lambda", "--case", "I.3", "--lam0", "-1"],
    ["solve-lambda", "--case", "I.3", "--window", "1", "0"],
    ["solve-lambda", "--case", "I.3", "--r", "2"],
    ["ops-check", "--grid", "15"],
    ["verify-lax", "--trials", "0"],
    [],
])
def test_usage_errors(capsysbinary, argv):
    assert run(capsysbinary, *argv)[0] == 2


def test_bad_catalog(capsysbinary, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsysbinary, "reduce", "--all", "--catalog", str(bad))
    assert code == 2 and "catalog" in err
    bad.write_text(json.dumps({"schema": "laxforge-reductions", "version": "0", "cases": {}}))
    assert run(capsysbinary, "reduce", "--all", "--catalog", str(bad))[0] == 2
    assert run(capsysbinary, "reduce", "--all", "--catalog", str(tmp_path / "missing.json"))[0] == 2


def test_failed_check_exits_one(capsysbinary):
    code, out, _ = run(capsysbinary, "solve-lambda", "--case", "I.1", "--r", "-1",
                       "--window", "0", "1")
    assert code == 1
    doc = json.loads(out)
    rec = doc["records"][0]
    assert rec["detail"]["status"] == "denominator-zero"


def test_symmetry_with_mutations(capsysbinary):
    code, out, _ = run(capsysbinary, "verify-symmetry", "--n", "1", "--mutations")
    doc = json.loads(out)
    assert code == 0
    assert sum(r["expect"] == "nonzero" for r in doc["records"]) == 18


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "laxforge.cli", "reduce", "--case", "III.2",
                          "--format", "text"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "RESULT PASS" in res.stdout


def test_verbose_logs_to_stderr():
    res = subprocess.run([sys.executable, "-m", "laxforge.cli", "-v", "reduce", "--case", "II.3"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "finished" in res.stderr


def test_verify_lax_n2_is_deterministic(capsysbinary):
    a = run(capsysbinary, "verify-lax", "--n", "2", "--seed", "7")
    b = run(capsysbinary, "verify-lax", "--n", "2", "--seed", "7")
    assert a[0] == 0 and a[1] == b[1]


def test_verify_symmetry_n3(capsysbinary):
    code, out, _ = run(capsysbinary, "verify-symmetry", "--n", "3")
    assert code == 0 and json.loads(out)["passed"]


def test_reduce_single_case_reports_spectrality(capsysbinary):
    code, out, _ = run(capsysbinary, "reduce", "--case", "I.1", "--n", "1")
    doc = json.loads(out)
    assert code == 0
    assert doc["sections"]["I.1"]["spectrality"] == "non-isospectral"

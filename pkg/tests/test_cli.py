import json
import subprocess
import sys

import pytest

from permforce.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_density_exact(capsys):
    code, out, _ = run(capsys, "density", "--pattern", "12", "--in", "231")
    assert code == 0 and json.loads(out) == {"value": "1/3"}
    code, out, _ = run(capsys, "density", "--pattern", "123", "--uniform", "4")
    assert json.loads(out) == {"value": "1/6"}


def test_density_matrix_file(tmp_path, capsys):
    f = tmp_path / "m.json"
    f.write_text(json.dumps({"n": 2, "rows": [["1", "0"], ["0", "1"]]}))
    code, out, _ = run(capsys, "density", "--pattern", "12", "--matrix", str(f))
    assert json.loads(out) == {"value": "3/4"}
    code, out, _ = run(capsys, "density", "--pattern", "12", "--matrix", str(f), "--samples", "20000", "--seed", "3")
    est = json.loads(out)
    assert abs(est["estimate"] - 0.75) < 4 * est["stderr"] and est["seed"] == 3


def test_density_mc_reproducible(capsys):
    argv = ["density", "--pattern", "123", "--alpha", "0", "--samples", "200000", "--seed", "7"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv, "--threads", "3")
    assert a == b
    est = json.loads(a)
    assert set(est) == {"estimate", "stderr", "samples", "seed"}
    assert abs(est["estimate"] - 0.25) < 4 * est["stderr"]


@pytest.mark.parametrize("argv", [
    ["density", "--pattern", "12"],
    ["density", "--pattern", "12", "--in", "231", "--uniform", "3"],
    ["density", "--pattern", "1x", "--in", "231"],
    ["density", "--pattern", "12", "--alpha", "2"],
    ["gradpoly", "1"],
    ["depcheck", "1"],
    ["depcheck", "12", "12"],
    ["verify-lemmas", "--max-order", "7"],
])
def test_input_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and "error" in json.loads(err)


def test_bad_matrix_file(tmp_path, capsys):
    f = tmp_path / "m.json"
    f.write_text(json.dumps({"n": 2, "rows": [["1", "0"], ["1", "0"]]}))
    assert run(capsys, "density", "--pattern", "12", "--matrix", str(f))[0] == 2


def test_gradpoly(capsys):
    assert json.loads(run(capsys, "gradpoly", "12")[1]) == {"k": 2, "coeffs": [["4"]]}
    assert json.loads(run(capsys, "gradpoly", "21")[1])["coeffs"] == [["-4"]]
    assert json.loads(run(capsys, "gradpoly", "123")[1])["coeffs"] == [["12", "-18"], ["-18", "36"]]
    assert json.loads(run(capsys, "gradpoly", "123", "--mirror")[1])["coeffs"][0][0] == "-6"


def test_depcheck_exit_codes(capsys):
    code, out, _ = run(capsys, "depcheck", "12")
    assert code == 0 and json.loads(out)["status"] == "independent"
    code, out, _ = run(capsys, "depcheck", "12", "21")
    rep = json.loads(out)
    assert code == 1 and rep["kernel"] == ["1", "1"]
    assert set(rep) >= {"set", "status", "lemma_patterns", "verdict"}


def test_search(capsys):
    code, out, _ = run(capsys, "search", "--size", "2", "--max-order", "5")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 1 and json.loads(lines[0])["set"] == ["12", "21"]
    assert run(capsys, "search", "--size", "1", "--max-order", "4")[1] == ""
    lines = run(capsys, "search", "--size", "3", "--max-order", "3")[1].strip().splitlines()
    assert len(lines) == 10


def test_witness(capsys):
    code, out, _ = run(capsys, "witness", "12", "--n", "3")
    rep = json.loads(out)
    assert code == 0 and max(rep["residuals"]) <= 1e-10 and rep["verification"]["witness"]
    code, out, _ = run(capsys, "witness", "12", "21")
    assert code == 1 and json.loads(out)["refused"]


def test_verify_lemmas_and_canary(capsys):
    code, out, _ = run(capsys, "verify-lemmas", "--max-order", "4")
    table = json.loads(out)
    assert code == 0 and all(r["passed"] for r in table["rows"])
    code, out, _ = run(capsys, "verify-lemmas", "--max-order", "4", "--canary")
    table = json.loads(out)
    assert code == 1 and not all(r["passed"] for r in table["rows"]) and table["canary"]
    code, out, _ = run(capsys, "verify-lemmas", "--max-order", "3", "--pretty")
    assert "PASS" in out and "FAIL" not in out


def test_sample_csv(tmp_path, capsys):
    f = tmp_path / "pts.csv"
    assert run(capsys, "sample", "--alpha", "0.5", "--count", "5", "--seed", "1", "--out", str(f))[0] == 0
    lines = f.read_text().splitlines()
    assert lines[0] == "x,y" and len(lines) == 6


def test_pretty_and_out(tmp_path, capsys):
    f = tmp_path / "o.json"
    run(capsys, "depcheck", "12", "123", "--out", str(f))
    assert json.loads(f.read_text())["status"] == "independent"
    out = run(capsys, "depcheck", "12", "123", "--pretty")[1]
    assert out.startswith("set: {12, 123}")


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "permforce.cli", "gradpoly", "12"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["coeffs"] == [["4"]]


def test_malpha_reproducible(capsys):
    argv = ["malpha", "--samples", "100000", "--tol", "0.02", "--seed", "1"]
    code, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert code == 0 and a == b
    res = json.loads(a)
    assert 0 < res["alpha0"] < 1 and len(res["densities"]) == 6

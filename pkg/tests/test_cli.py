import io
import json

import pytest
from jsonschema import ValidationError

from ncpsatz import cli
from ncpsatz.moment import Witness

def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), out, err)
    text = out.getvalue()
    return code, (json.loads(text) if text.strip() else None), text, err.getvalue()

@pytest.fixture
def files(tmp_path):
    ball = tmp_path / "ball.json"
    ball.write_text(json.dumps({"A": [[[0, -1], [-1, 0]]]}))
    half = tmp_path / "halfline.json"
    half.write_text(json.dumps({"A": [[[1]]]}))
    return {"ball": str(ball), "half": str(half), "dir": tmp_path}

def test_certify_concave(files):
    code, rep, _, _ = run("certify", "-p", "2 - x1*x1", "-q", "1 - x1*x1")
    assert code == 0 and rep["status"] == "certificate"
    assert rep["residuals"]["certificate"] <= 1e-6
    assert cli.report_schema_validate(rep)

def test_certify_witness(files):
    code, rep, _, _ = run("certify", "-p", "x1", "-L", files["ball"])
    assert code == 1 and rep["status"] == "witness"
    assert rep["residuals"]["value"] <= -0.9
    assert cli.report_schema_validate(rep)

def test_bounded_half_line(files):
    code, rep, _, _ = run("bounded", "-L", files["half"])
    assert code == 1 and rep["status"] == "unbounded"

def test_bounded_ball(files):
    code, rep, _, _ = run("bounded", "-L", files["ball"])
    assert code == 0 and rep["residuals"]["unit_identity"] <= 1e-8

def test_missing_residuals_invalid(files):
    _, rep, _, _ = run("certify", "-p", "2 - x1*x1", "-q", "1 - x1*x1")
    del rep["residuals"]
    with pytest.raises(ValidationError) as exc:
        cli.report_schema_validate(rep)
    assert "residuals" in str(exc.value)

def test_bad_exit_code_invalid(files):
    _, rep, _, _ = run("bounded", "-L", files["half"])
    rep["exit_code"] = 64
    with pytest.raises(ValidationError):
        cli.report_schema_validate(rep)

def test_witness_round_trip(files):
    _, rep, text, _ = run("certify", "-p", "x1", "-L", files["ball"])
    W = Witness.from_json(json.loads(text)["result"]["witness"])
    assert W.to_json().keys() == rep["result"]["witness"].keys()
    again = json.loads(cli.dumps({"w": W.to_json()}))["w"]
    assert again == rep["result"]["witness"]

def test_deterministic_reports(files):
    a = run("certify", "-p", "x1", "-L", files["ball"], "--seed", "5")[2]
    b = run("certify", "-p", "x1", "-L", files["ball"], "--seed", "5")[2]
    assert a == b
    c = run("eval", "-p", "1 - x1*x1", "-q", "1 - x1*x1", "--trials", "20")[2]
    d = run("eval", "-p", "1 - x1*x1", "-q", "1 - x1*x1", "--trials", "20")[2]
    assert c == d

@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["certify", "-p", "x1"],
    ["certify", "-p", "x1 +", "-q", "1 - x1*x1"],
    ["dominate", "-L", "{\"A\": [[[0]]]}"],
    ["export-sdpa", "-p", "x1", "-q", "1 - x1"],
    ["certify", "-p", "x1", "-q", "1 - x1", "--tol", "-1"],
])
def test_usage_errors(argv):
    code, rep, _, err = run(*argv)
    assert code == 64 and rep is None and err

def test_dominate_reports(files):
    code, rep, _, _ = run("dominate", "-L", files["ball"], "--Lp", "1 - x1")
    assert code == 0 and rep["residuals"]["identity"] <= 1e-8
    code, rep, _, _ = run("dominate", "-L", files["half"], "--Lp", files["ball"])
    assert code == 1 and rep["residuals"]["L_min_eig"] >= -1e-8 and rep["residuals"]["Lp_min_eig"] <= -1e-7

def test_unitcert_reports(files):
    code, rep, _, _ = run("unitcert", "-L", files["ball"])
    assert code == 0 and rep["residuals"]["identity"] <= 1e-8
    code, rep, _, _ = run("unitcert", "-L", files["half"])
    assert code == 1 and rep["residuals"]["combination_min_eig"] > 0

def test_normalize(files):
    code, rep, _, _ = run("normalize", "-q", "1 - x1*x1")
    assert code == 0 and rep["residuals"]["decomposition"] <= 1e-12
    code, rep, _, _ = run("normalize", "-q", "1 + x1*x1")
    assert code == 1 and rep["status"] == "not-concave"

def test_eval_point():
    code, rep, _, _ = run("eval", "-p", "1 - x1*x1", "--point", "[[[0.5]]]")
    assert code == 0 and rep["residuals"]["min_eig"] == pytest.approx(0.75)
    code, rep, _, _ = run("eval", "-p", "1 - x1*x1", "--point", "[[[2.0]]]")
    assert code == 1

def test_gns_command(files):
    mom = files["dir"] / "m.json"
    mom.write_text(json.dumps({"nvars": 1, "nu": 1, "degree": 2,
                               "values": {"1": [[1.0]], "x1": [[0.5]], "x1*x1": [[0.25]]}}))
    code, rep, _, _ = run("gns", "--moments", str(mom))
    assert code == 0 and rep["result"]["flatness"]["flat"]
    assert rep["residuals"]["max_residual"] <= 1e-9

def test_export_sdpa(files):
    path = files["dir"] / "p.dat-s"
    code, rep, _, _ = run("export-sdpa", "-p", "2 - x1*x1", "-q", "1 - x1*x1", "--sdpa-out", str(path))
    assert code == 0
    lines = path.read_text().splitlines()
    assert int(lines[0].split()[0]) == rep["result"]["m"]
    path2 = files["dir"] / "d.dat-s"
    code, _, _, _ = run("export-sdpa", "-p", "x1", "-L", files["ball"], "--sdpa-out", str(path2), "--dual")
    assert code == 0 and path2.exists()

VERIFIER_KEYS = {"certify": "certificate", "dominate": "identity", "unitcert": "identity",
                 "normalize": "decomposition", "bounded": "unit_identity", "refute": "sdp_primal_residual_rel"}

def test_exit_zero_embeds_residual(files):
    runs = [
        ("certify", ["-p", "2 - x1*x1", "-q", "1 - x1*x1"], 1e-6),
        ("certify", ["-p", "1 + x1*x1", "-L", files["ball"]], 1e-6),
        ("dominate", ["-L", files["ball"], "--Lp", "1 + x1"], 1e-8),
        ("unitcert", ["-L", files["ball"]], 1e-8),
        ("normalize", ["-q", "1 - x1*x1 - x1"], 1e-8),
        ("bounded", ["-L", files["ball"]], 1e-8),
        ("refute", ["-p", "2 - x1*x1", "-q", "1 - x1*x1"], 1e-8),
    ]
    for cmd, args, tol in runs:
        code, rep, _, _ = run(cmd, *args)
        assert code == 0, (cmd, rep["status"])
        assert rep["residuals"][VERIFIER_KEYS[cmd]] <= tol
        assert rep["config"]["seed"] == cli.DEFAULT_SEED

import json

import numpy as np
import pytest

from qsdkit.cli import main
from qsdkit.fileio import load_schema, write_chain
from qsdkit.fixtures import DOWNWARD_DRIFT, UPWARD_DRIFT, chain_A, dag4

jsonschema = pytest.importorskip("jsonschema")
SCHEMA = load_schema()


@pytest.fixture
def files(tmp_path):
    write_chain(chain_A(), tmp_path / "A.chain")
    write_chain(dag4(), tmp_path / "dag4.chain")
    (tmp_path / "bad.chain").write_text("qsd-chain v1 d=2\n0 0 0.5\n1 0 0.8\n1 1 0.5\n")
    (tmp_path / "drift.rules").write_text(DOWNWARD_DRIFT)
    (tmp_path / "up.rules").write_text(UPWARD_DRIFT)
    (tmp_path / "broken.rules").write_text("to = x+ ; p = 1\n")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    report = json.loads(out) if out else None
    if report is not None:
        jsonschema.validate(report, SCHEMA)
    return code, report, out, err


def test_qsd_chain_A(files, capsys):
    code, rep, _, _ = run(capsys, "qsd", files / "A.chain")
    assert code == 0
    c = rep["certificate"]
    assert c["theta_bar"] == 0.5
    assert c["j"] == [0, 1]
    assert np.allclose(c["eta"], [[1.0, 0.6]], atol=1e-12)
    assert c["nu"] == [[1.0, 0.0]]
    assert len(rep["provenance"]["inputs"][0]["sha256"]) == 64


def test_verify_chain_A(files, capsys):
    code, rep, _, _ = run(capsys, "verify", files / "A.chain", "--n", 4000, "--samples", 20000)
    assert code == 0
    assert rep["verification"]["j_hat"] == [0, 1]
    assert rep["provenance"]["seeds"] == {"monte_carlo": 0}


def test_verify_skips_subleading_states(files, capsys):
    code, rep, _, _ = run(capsys, "verify", files / "dag4.chain", "--samples", 0)
    assert code == 0
    assert rep["verification"]["j_agreement"]["per_state"][1] == "skipped"
    assert all(m["status"] == "skipped" for m in rep["verification"]["monte_carlo"])


def test_malformed_file_exits_1(files, capsys):
    code, rep, _, err = run(capsys, "qsd", files / "bad.chain")
    assert code == 1 and rep is None
    assert "row 1" in err


def test_reports_are_byte_identical(files, capsys):
    _, _, a, _ = run(capsys, "verify", files / "A.chain", "--samples", 5000, "--seed", 3)
    _, _, b, _ = run(capsys, "verify", files / "A.chain", "--samples", 5000, "--seed", 3)
    assert a == b


def test_analyze(files, capsys):
    code, rep, _, _ = run(capsys, "analyze", files / "dag4.chain")
    assert code == 0
    assert rep["classes"]["j_class"] == [0, 0, 0, 1]
    assert "certificate" not in rep


def test_operator_lab(files, capsys):
    code, rep, _, _ = run(capsys, "operator-lab", "--case", 2, "--instances", 5, "--seed", 1)
    assert code == 0
    assert rep["operator_lab"]["max_error"] <= 1e-6
    assert rep["provenance"]["seeds"] == {"operator_lab": 1}


def test_lyapunov_reports_failed_drift(files, capsys):
    code, rep, _, _ = run(capsys, "lyapunov", files / "drift.rules")
    assert code == 2
    assert rep["lyapunov"]["drift"] == "fail"
    assert rep["stability"]["status"] == "pass"


def test_lyapunov_steeper_weight_passes(files, capsys):
    code, rep, _, _ = run(capsys, "lyapunov", files / "drift.rules", "--V", "pow(1.8, x)",
                          "--N", "200,400,800")
    assert code == 0
    assert rep["summary"].startswith("consistent with")


def test_lyapunov_upward_drift(files, capsys):
    code, rep, _, _ = run(capsys, "lyapunov", files / "up.rules")
    assert code == 2 and rep["stability"]["status"] == "fail"


@pytest.mark.parametrize("argv", [
    ["lyapunov", "broken.rules"],
    ["qsd", "missing.chain"],
    ["operator-lab", "--case", "4"],
    ["verify", "A.chain", "--n", "1"],
    ["lyapunov", "drift.rules", "--N", "100"],
])
def test_input_errors_exit_1(files, capsys, argv):
    argv = [str(files / a) if a.endswith((".chain", ".rules")) else a for a in argv]
    code, rep, _, _ = run(capsys, *argv)
    assert code == 1 and rep is None

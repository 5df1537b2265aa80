import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qsuff import cli
from qsuff.cli import main
from qsuff.errors import StructureError
from qsuff.modelfile import encode_matrix
from qsuff.report import ResidualTable

FIX = Path(__file__).resolve().parents[1] / "src" / "qsuff" / "fixtures"


def fx(name):
    return str(FIX / name)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, _ = run_cli(capsys, *argv)
    return code, json.loads(out)


def test_minsuff_commuting(capsys):
    code, r = report(capsys, "minsuff", fx("commuting.json"))
    assert code == 0 and r["passed"]
    assert r["results"]["algebra_dim"] == 2
    assert all(row["pass"] for row in r["residual_table"])


def test_minsuff_qubit_scalars(capsys):
    _, r = report(capsys, "minsuff", fx("qubit_local.json"))
    _, c = report(capsys, "minsuff", fx("qubit_local.json"), "--scalars", "complex")
    assert (r["results"]["algebra_dim"], c["results"]["algebra_dim"]) == (4, 8)
    _, j = report(capsys, "jordan", fx("qubit_local.json"))
    assert j["results"]["algebra_dim"] == 3


def test_ki_constructed_reports_weights(capsys):
    code, r = report(capsys, "ki", fx("ki_constructed.json"))
    assert code == 0
    assert [(b["kind"], b["n"], b["m"]) for b in r["results"]["blocks"]] == [("C", 2, 2)]
    assert np.abs(np.array(r["results"]["P"][0]) - [1.25, 0.75]).max() < 1e-9


def test_restrict_padded_model(capsys):
    code, r = report(capsys, "restrict", fx("padded_commuting.json"))
    assert code == 0
    assert (r["results"]["dim_input"], r["results"]["dim"]) == (4, 2)


def test_structure_spin_factor(capsys):
    _, r = report(capsys, "structure", fx("spin_factor.json"), "--mode", "jordan")
    assert r["passed"]
    assert r["results"]["jordan_dim"] == 5
    assert [(b["kind"], b["n"]) for b in r["results"]["blocks"]] == [("Gamma", 4)]


def test_bound_and_fisher(capsys):
    _, r = report(capsys, "bound", fx("qubit_local.json"), "--params", "3")
    assert r["results"]["bound"] == 3 + 6 - 1
    _, r = report(capsys, "bound", fx("qubit_local.json"), "--setting", "bayesian")
    assert r["results"]["bound"] == 3
    code, r = report(capsys, "fisher", fx("qubit_z.json"), "--povm", fx("qubit_povm_z.json"))
    assert code == 0
    assert abs(r["results"]["classical_fisher"][0][0] - 1.0) < 1e-12


@pytest.mark.parametrize("cmd", ["ratios", "jordan", "ce", "pipeline", "verify"])
def test_commands_pass_on_fixtures(capsys, cmd):
    for name in ("commuting.json", "ki_constructed.json"):
        code, r = report(capsys, cmd, fx(name))
        assert code == 0, [row for row in r["residual_table"] if not row["pass"]]


def test_report_embeds_tolerances_and_digest(capsys):
    _, r = report(capsys, "jordan", fx("commuting.json"), "--tol", "1e-7")
    assert r["tolerances"]["member"] == 1e-7
    assert "rank" in r["tolerances"] and "sufficiency" in r["tolerances"]
    _, r2 = report(capsys, "jordan", fx("commuting.json"))
    assert r["inputs_digest"] != r2["inputs_digest"]
    assert len(r2["inputs_digest"]) == 64


def test_text_format(capsys):
    code, out, _ = run_cli(capsys, "minsuff", fx("commuting.json"), "--format", "text")
    assert code == 0
    assert out.startswith("qsuff minsuff: PASS")


def test_out_file(capsys, tmp_path):
    p = tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "jordan", fx("commuting.json"), "--out", str(p))
    assert code == 0 and out == ""
    assert json.loads(p.read_text())["command"] == "jordan"


def test_exit_code_2_on_input_errors(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run_cli(capsys, "minsuff", str(bad))
    assert code == 2 and "malformed JSON" in err
    neg = tmp_path / "neg.json"
    neg.write_text(json.dumps({"dim": 2, "reference": encode_matrix(np.diag([1.0, -1e-3])),
                               "elements": []}))
    code, _, err = run_cli(capsys, "minsuff", str(neg))
    assert code == 2 and "reference not PSD" in err
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["minsuff", fx("commuting.json"), "--bogus"])
    assert exc.value.code == 2


def test_exit_code_1_on_failed_check(capsys, monkeypatch):
    def failing(m, args, rng):
        t = ResidualTable()
        t.add("always_fails", 1.0, 1e-9)
        return {"dim": m.dim}, t

    monkeypatch.setitem(cli._HANDLERS, "jordan", failing)
    code, r = report(capsys, "jordan", fx("commuting.json"))
    assert code == 1 and not r["passed"]
    assert r["residual_table"][0]["check"] == "always_fails"


def test_exit_code_1_on_numerical_error(capsys, monkeypatch):
    def broken(m, args, rng):
        raise StructureError("no generic element found")

    monkeypatch.setitem(cli._HANDLERS, "jordan", broken)
    code, r = report(capsys, "jordan", fx("commuting.json"))
    assert code == 1
    assert r["error"] == "StructureError: no generic element found"


def test_fisher_povm_dimension_mismatch(capsys):
    code, _, err = run_cli(capsys, "fisher", fx("spin_factor.json"), "--povm", fx("qubit_povm_z.json"))
    assert code == 2 and "dimension mismatch" in err


def test_selftest_deterministic_and_job_independent(capsys):
    a = run_cli(capsys, "selftest", "--seed", "3", "--dims", "2,3")
    b = run_cli(capsys, "selftest", "--seed", "3", "--dims", "2,3", "--jobs", "2")
    assert a[0] == 0 and a[1] == b[1]
    trials = json.loads(a[1])["results"]["trials"]
    assert {t["trial_dim"] for t in trials} == {2, 3}


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "qsuff", "jordan", fx("commuting.json")],
                       capture_output=True, text=True, check=False)
    assert p.returncode == 0
    assert json.loads(p.stdout)["passed"]


def test_cli_without_compiled_kernel():
    # block the extension import so the package falls back to pure Python
    code = ("import sys; sys.modules['qsuff._gs_kernel'] = None\n"
            "from qsuff import kernels; from qsuff.cli import main\n"
            "assert kernels.BACKEND == 'python' and kernels.available_backends() == ['python']\n"
            f"sys.exit(main(['ki', {fx('ki_constructed.json')!r}]))\n")
    p = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=False)
    assert p.returncode == 0, p.stderr
    r = json.loads(p.stdout)
    assert np.abs(np.array(r["results"]["P"][0]) - [1.25, 0.75]).max() < 1e-9

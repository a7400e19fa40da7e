import json

import numpy as np
import pytest

from srlasso import cli, io
from srlasso.solvers import PrimalDualPair

from conftest import EX1_A, EX1_B, EX2_A, EX2_B, gaussian_instance


@pytest.fixture
def files(tmp_path):
    def write(name, M):
        path = tmp_path / name
        io.write_matrix_csv(path, np.asarray(M, dtype=float))
        return str(path)
    out = {"A1": write("A1.csv", EX1_A), "b1": write("b1.csv", EX1_B),
           "A2": write("A2.csv", EX2_A), "b2": write("b2.csv", EX2_B),
           "Adup": write("Adup.csv", [[1, 1, 0], [0, 0, 1], [0, 0, 0.5]]),
           "bdup": write("bdup.csv", [2, 1, 1]),
           "I": write("I.csv", np.eye(2)), "ones": write("ones.csv", [1, 1])}
    A, b, _ = gaussian_instance(np.random.default_rng(0), 30, 60, 4)
    out["As"], out["bs"] = write("As.csv", A), write("bs.csv", b)
    out["dir"] = tmp_path
    return out


def run(argv, capsys):
    code = cli.dispatch([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_example_one(files, capsys):
    code, out, _ = run(["solve", "--matrix", files["A1"], "--rhs", files["b1"],
                        "--lambda", "0.8944"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["status"] == "ok"
    assert np.linalg.norm(rep["x"]) <= 1e-3 and rep["gap"] <= 1e-9
    assert set(rep) >= {"x", "y", "residual_norm", "primal_value", "dual_value", "gap",
                        "iterations", "converged", "config"}
    assert rep["config"]["solver"]["gap_tol"] == 1e-9


def test_solve_lasso_program(files, capsys):
    code, out, _ = run(["solve", "--matrix", files["A1"], "--rhs", files["b1"],
                        "--lambda", "0.5", "--program", "UC"], capsys)
    assert code == 0
    # columns 2 and 3 coincide, so only the fit A z = (0.5, 1.5) is unique
    np.testing.assert_allclose(EX1_A @ json.loads(out)["x"], [0.5, 1.5], atol=1e-8)


def test_check_example_two(files, capsys):
    code, out, _ = run(["check", "--matrix", files["A2"], "--rhs", files["b2"],
                        "--lambda", "1.41421356", "--one-based"], capsys)
    rep = json.loads(out)
    assert code == 0
    reg = rep["regularity"]
    assert (reg["weak"], reg["intermediate"], reg["strong"]) == (True, True, False)
    assert rep["sets"]["J"] == [2]


def test_check_example_one_witness(files, capsys):
    lam = 2 / np.sqrt(5)
    code, out, _ = run(["check", "--matrix", files["A1"], "--rhs", files["b1"],
                        "--lambda", repr(float(lam)), "--full-zstar"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["sets"]["J"] == [1, 2]
    assert rep["regularity"]["weak_optimum_Zstar"] <= 5 * lam / 6 + 1e-6
    assert len(rep["regularity"]["weak_witness_z"]) == 2


def test_check_exit_codes(files, capsys):
    code, out, _ = run(["check", "--matrix", files["Adup"], "--rhs", files["bdup"],
                        "--lambda", "0.5"], capsys)
    assert code == 4 and json.loads(out)["regularity"]["weak"] is False
    code, out, _ = run(["check", "--matrix", files["I"], "--rhs", files["ones"],
                        "--lambda", "0.1"], capsys)
    assert code == 3 and json.loads(out)["status"] == "indeterminate"


def test_not_converged_exit(files, capsys, monkeypatch):
    def stuck(p, s=None, **kw):
        z = np.zeros(p.A.shape[1])
        return PrimalDualPair(z, np.zeros(p.A.shape[0]), p.b.copy(), 1.0, 1.0, 0.0, 1.0,
                              5, False)
    monkeypatch.setattr(cli, "solve_srlasso", stuck)
    out_path = files["dir"] / "r.json"
    code, _, _ = run(["solve", "--matrix", files["A1"], "--rhs", files["b1"], "--lambda", "1",
                      "-o", out_path], capsys)
    assert code == 5
    assert json.loads(out_path.read_text())["status"] == "not-converged"


def test_sensitivity_subcommand(files, capsys):
    q = files["dir"] / "q.csv"
    io.write_matrix_csv(q, np.random.default_rng(1).standard_normal(30))
    code, out, _ = run(["sensitivity", "--matrix", files["As"], "--rhs", files["bs"],
                        "--lambda", "0.5", "--direction", q, "--alpha", "0.1", "--validate",
                        "--lasso-lambda", "2.0"], capsys)
    rep = json.loads(out)
    assert code == 0
    sens = rep["sensitivity"]
    assert rep["regularity"]["strong"] is True
    assert sens["L_SR_lambda_bound"] > 0 and sens["L_UC_lambda_bound"] > 0
    assert max(sens["validation"].values()) <= 1e-3
    assert len(sens["jacobian_b"]) == 60


def test_usage_errors(files, capsys, tmp_path):
    out_path = tmp_path / "never.json"
    code, out, err = run(["solve", "--matrix", tmp_path / "missing.csv", "--rhs", files["b1"],
                          "--lambda", "1", "-o", out_path], capsys)
    assert code == 2 and "usage:" in err and not out
    assert not out_path.exists()
    assert run(["solve", "--rhs", files["b1"]], capsys)[0] == 2
    assert run(["solve", "--matrix", files["A1"], "--rhs", files["b2"], "--lambda", "-1"], capsys)[0] == 2
    assert run(["solve", "--matrix", files["A1"], "--rhs", files["I"], "--lambda", "1"], capsys)[0] == 2
    assert run(["bogus"], capsys)[0] == 2
    assert run([], capsys)[0] == 2


def test_help_documents_flags(capsys):
    code, out, _ = run(["check", "--help"], capsys)
    assert code == 0
    for flag in ("--matrix", "--rhs", "--lambda", "--gap-tol", "--one-based", "--full-zstar"):
        assert flag in out
    code, out, _ = run(["experiment", "--help"], capsys)
    assert "--jobs" in out and "SRLL_SEED" in out


def test_idempotent_output(files, capsys):
    paths = [files["dir"] / f"r{k}.json" for k in range(2)]
    for path in paths:
        run(["check", "--matrix", files["A2"], "--rhs", files["b2"], "--lambda", "1.4142135623730951",
             "-o", path], capsys)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def _config_file(tmp_path, **kw):
    obj = {"experiment": "noise-robustness", "dims": [{"m": 10, "n": 20, "s": 2}],
           "gammas": [0.1, 1.0], "seeds": [0, 1], "grid": {"count": 5},
           "output_dir": str(tmp_path / "out")}
    obj.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(obj))
    return path


def test_experiment_subcommand(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SRLL_SEED", "4")
    cfg = _config_file(tmp_path)
    code, out, err = run(["experiment", "--name", "noise-robustness", "--config", cfg,
                          "--jobs", "2"], capsys)
    assert code == 0
    assert "2/2 cells" in err
    report = json.loads((tmp_path / "out" / "noise-robustness_report.json").read_text())
    assert report["config"]["seeds"] == [4]
    assert report["config"]["solver"]["gap_tol"] == 1e-9
    assert out.strip().endswith("noise-robustness_report.json")
    for suffix in (".csv", ".svg", "_summary.csv"):
        assert (tmp_path / "out" / f"noise-robustness{suffix}").exists()


def test_experiment_usage_errors(tmp_path, capsys):
    cfg = _config_file(tmp_path, seeds=[])
    assert run(["experiment", "--name", "noise-robustness", "--config", cfg], capsys)[0] == 2
    assert not (tmp_path / "out").exists()
    cfg = _config_file(tmp_path)
    assert run(["experiment", "--name", "bound-tightness", "--config", cfg], capsys)[0] == 2
    assert run(["experiment", "--name", "noise-robustness", "--config",
                tmp_path / "nope.json"], capsys)[0] == 2
    (tmp_path / "broken.json").write_text("{")
    assert run(["experiment", "--name", "noise-robustness", "--config",
                tmp_path / "broken.json"], capsys)[0] == 2

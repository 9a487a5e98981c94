import json

import pytest

from disordered_chain.cli import main


def test_verify_quick_exits_zero(capsys):
    assert main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_missing_ring_size_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["greenkubo", "--samples", "1"])
    assert exc.value.code == 2


def test_greenkubo_output_is_deterministic(tmp_path):
    args = ["greenkubo", "--n", "12", "--samples", "2", "--z-grid", "0.1,0.03,0.01", "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.json")]) == 0
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    assert a == b
    rec = json.loads(a)
    assert rec["schema"] == 1 and rec["D_bar"] >= 1.0 and len(rec["z_series"]) == 3
    assert set(rec) >= {"params", "z_series", "D_bar", "D_var", "uncertainties"}


def test_variational_json(tmp_path):
    assert main(["variational", "--n", "16", "--ell", "2", "--samples", "1", "--out", str(tmp_path / "v.json")]) == 0
    rec = json.loads((tmp_path / "v.json").read_text())
    assert rec["D_var"] > 1.0 and rec["D_bar"] is None


def test_simulate_csv_and_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model.n = 6\nsimulate.t_final = 0.5\nseed = 3\n")
    out = tmp_path / "traj.csv"
    assert main(["--config", str(cfg), "simulate", "--obs-grid", "0,0.25", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x,omega,J_drift,J_mart" and len(lines) == 1 + 3 * 6
    assert main(["--config", str(cfg), "simulate", "--replicas", "2", "--out", str(out)]) == 0
    assert (tmp_path / "traj_r1.csv").exists()


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("model.n = 6\nmodel.color = red\n")
    assert main(["--config", str(cfg), "simulate"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"
    assert main(["--config", str(tmp_path / "missing.cfg"), "simulate"]) == 2


def test_unwritable_output_reports_error(tmp_path, capsys):
    assert main(["simulate", "--n", "6", "--out", str(tmp_path / "no" / "x.csv")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["schema"] == 1 and "does not exist" in err["message"]


def test_invalid_model_reports_error(capsys):
    assert main(["simulate", "--n", "6", "--gamma", "-1"]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "ValueError"


def test_fluctuations_csv_and_summary(tmp_path):
    out = tmp_path / "modes.csv"
    args = ["fluctuations", "--n", "16", "--modes", "1,2", "--replicas", "2", "--samples", "1", "--t-run", "150", "--out", str(out)]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "k,t,acf,acf_err" and lines[1].startswith("1,0.0,1.0")
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["schema"] == 1 and summary["D_mc"] > 0

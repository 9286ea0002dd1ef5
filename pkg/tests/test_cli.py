import json
import math
import shutil
import subprocess

import pytest

from snls.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from snls.scenarios import scenario


@pytest.fixture
def small_config(tmp_path):
    cfg = scenario("desk-focusing", grid={"n": 128, "L": 8 * math.pi}, time={"T": 0.02, "dt": 1e-3},
                   snapshot_stride=5, diagnostics=["mass_drift", "equivalence_error", "weak_form_residual"])
    f = tmp_path / "cfg.json"
    f.write_text(cfg.to_json())
    return f


def test_pairs(capsys):
    assert main(["pairs", "--d", "1", "--alpha", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "step1" in out and "12" in out
    assert main(["pairs", "--d", "5", "--alpha", "2", "--context", "ycor-d567", "--format", "json"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["p"] == "15/7" and rows[0]["q"] == "12"
    assert main(["pairs", "--d", "6", "--alpha", "9", "--context", "step1"]) == EXIT_FAILED


def test_check_powers(capsys):
    assert main(["check-powers", "--d", "5", "--scope", "local-H2", "--alpha", "2"]) == EXIT_OK
    assert "(1, 5/3) U [2, 5)" in capsys.readouterr().out
    assert main(["check-powers", "--d", "5", "--scope", "local-H2", "--alpha", "17/10"]) == EXIT_FAILED
    assert "outside" in capsys.readouterr().err
    assert main(["check-powers", "--d", "1-3", "--format", "csv"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("d,scope,lambda,range")


def test_simulate_verify_norms(tmp_path, small_config, capsys):
    run_dir = tmp_path / "run"
    assert main(["simulate", "--config", str(small_config), "--out", str(run_dir)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "PASS mass_drift" in out
    assert (run_dir / "series.csv").exists() and (run_dir / "snapshots").is_dir()

    assert main(["verify", str(run_dir)]) == EXIT_OK
    report = json.loads((run_dir / "report.json").read_text())
    assert report["passed"] is True
    assert (run_dir / "checks.csv").read_text().startswith("check,level,dt,metric,threshold,slope,passed")

    capsys.readouterr()
    assert main(["norms", str(run_dir), "--window", "0.01", "--format", "json"]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 2 and all(r["xtilde"] > 0 for r in rows)


def test_verify_detects_tampering(tmp_path, small_config, capsys):
    run_dir = tmp_path / "run"
    main(["simulate", "--config", str(small_config), "--out", str(run_dir)])
    f = run_dir / "series.csv"
    lines = f.read_text().splitlines()
    cells = lines[5].split(",")
    cells[1] = repr(float(cells[1]) * (1 + 1e-9))
    lines[5] = ",".join(cells)
    f.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["verify", str(run_dir)]) == EXIT_FAILED
    assert "rerun_identical" in capsys.readouterr().err


def test_simulate_to_stdout_with_refine(small_config, capsys):
    assert main(["simulate", "--config", str(small_config), "--refine", "1", "--seed", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("series,t,value")
    assert "0.0005" in out


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"alpha": 1.0, "d": 5}))
    assert main(["simulate", "--config", str(bad)]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "alpha" in err and "dimensions" in err
    assert main(["verify", str(tmp_path / "missing")]) == EXIT_USAGE
    assert main(["simulate", "--scenario", "nope"]) == EXIT_USAGE


def test_convergence_exit_code_reflects_check(capsys):
    code = main(["convergence", "--scenario", "desk-focusing", "--check", "residual"])
    out = capsys.readouterr().out
    assert ("PASS" in out) == (code == EXIT_OK)
    assert "weak_form_residual" in out


@pytest.mark.skipif(shutil.which("snls") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["snls", "check-powers", "--d", "8", "--scope", "local-H2"], capture_output=True, text=True)
    assert res.returncode == 0 and "(1, 4/3)" in res.stdout

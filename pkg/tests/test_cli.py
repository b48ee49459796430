import json
import subprocess
import sys

import pytest
import yaml

from conftest import DESK, base_doc, case_path
from flexgauge.cli import main
from flexgauge.sweep import read_results


def test_solve_writes_outputs(tmp_path, capsys):
    rc = main(["solve", "--case", str(DESK[0]), "--out", str(tmp_path), "--seed", "7"])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    rows = read_results(tmp_path / "results.csv")
    assert rows[0][1].tf == pytest.approx(report["indices"]["tf"])
    assert "TF" in capsys.readouterr().out


def test_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("buses: [1, 2\n")
    assert main(["solve", "--case", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_bad_option_exit_code(tmp_path):
    assert main(["solve", "--case", str(DESK[0]), "--out", str(tmp_path), "--tol", "-1"]) == 2


def test_argparse_errors_exit_two(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--case", str(DESK[0]), "--target", "budget", "--sf", "a,b",
              "--out", str(tmp_path)])
    assert info.value.code == 2


def test_base_infeasible_exit_code(tmp_path):
    doc = base_doc()
    doc["budget"] = 10.0
    path = tmp_path / "tight.yaml"
    path.write_text(yaml.safe_dump(doc))
    assert main(["solve", "--case", str(path), "--out", str(tmp_path / "o")]) == 3
    assert read_results(tmp_path / "o" / "results.csv")[0][1] is None


def test_iteration_limit_exit_code(tmp_path):
    assert main(["solve", "--case", str(DESK[0]), "--max-iters", "1", "--out", str(tmp_path)]) == 4
    assert (tmp_path / "report.json").exists()


def test_unsorted_factors_exit_two(tmp_path):
    assert main(["sweep", "--case", str(DESK[0]), "--target", "ramp", "--sf", "2,1",
                 "--out", str(tmp_path)]) == 2


def test_sweep_outputs(tmp_path):
    rc = main(["sweep", "--case", str(case_path("budget_sweep.yaml")), "--target", "budget",
               "--sf", "0.9,1.0,1.5", "--out", str(tmp_path)])
    assert rc == 0
    rows = read_results(tmp_path / "results.csv")
    assert [sf for sf, _ in rows] == [0.9, 1.0, 1.5]
    assert rows[0][1] is None and rows[1][1].agcf == pytest.approx(0.0, abs=1e-9)
    meta = json.loads((tmp_path / "run.json").read_text())
    assert meta["target"] == "budget" and len(meta["rows"]) == 3


def test_oracle_command(tmp_path):
    rc = main(["oracle", "--case", str(DESK[0]), "--lambda-grid", "0.5", "--out", str(tmp_path)])
    assert rc == 0
    summary = json.loads((tmp_path / "oracle_summary.json").read_text())
    assert summary["max_abs_diff"] <= 1e-6
    assert summary["benders_tf"] >= summary["ray_flexibility"] - 1e-4
    assert len((tmp_path / "oracle.csv").read_text().splitlines()) > 10


def test_oracle_guard_exit_two(tmp_path):
    doc = base_doc(T=20)
    path = tmp_path / "long.yaml"
    path.write_text(yaml.safe_dump(doc))
    assert main(["oracle", "--case", str(path), "--lambda-grid", "1", "--out", str(tmp_path)]) == 2


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "flexgauge.cli", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "flexgauge" in out.stdout

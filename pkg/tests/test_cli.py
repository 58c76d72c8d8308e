import csv
import dataclasses
import json
import subprocess
import sys

import numpy as np
import pytest

from dualcbf import cli, scenarios
from dualcbf.cli import main, read_trajectory, trajectory_columns


def test_run_writes_outputs(tmp_path, capsys):
    out, rep = tmp_path / "traj.csv", tmp_path / "report.json"
    assert main(["run", "conflict", "--out", str(out), "--report", str(rep)]) == 0
    with open(out, newline="") as fh:
        header = next(csv.reader(fh))
    assert header == trajectory_columns(1)
    report = json.loads(rep.read_text())
    assert report["satisfied"] is True
    assert "satisfied" in capsys.readouterr().out


def test_check_agrees_with_run(tmp_path, capsys):
    out, rep = tmp_path / "traj.csv", tmp_path / "report.json"
    main(["run", "recurrence", "--out", str(out), "--report", str(rep)])
    capsys.readouterr()
    spec = json.loads(rep.read_text())
    text = "G[0,20]F[0,10](x>=10 & x<=11) && F[0,15](x<=5 & x>=4) && F[20,30](x<=3 & x>=2)"
    assert main(["check", str(out), text]) == (0 if spec["satisfied"] else 1)
    first = capsys.readouterr().out.splitlines()[0]
    assert float(first.split()[1]) == pytest.approx(spec["robustness"], rel=1e-5)


def write(path, t, x):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x1"])
        w.writerows(zip(t, x))


def test_check_violated_globally(tmp_path, capsys):
    t = np.round(np.arange(0, 5.01, 0.1), 10)
    x = np.where((t > 2) & (t < 3), 5.0, 1.5)
    path = tmp_path / "bad.csv"
    write(path, t, x)
    assert main(["check", str(path), "G[0,5](box(x,1,2))"]) == 1
    assert "robustness -3" in capsys.readouterr().out


def test_check_short_trajectory(tmp_path):
    t = np.round(np.arange(0, 2.01, 0.1), 10)
    path = tmp_path / "short.csv"
    write(path, t, np.full_like(t, 1.5))
    assert main(["check", str(path), "G[0,5](box(x,1,2))"]) == 2


def test_check_missing_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,pos\n0,1\n")
    assert main(["check", str(path), "G[0,5](box(x,1,2))"]) == 2


def test_read_trajectory_without_inputs(tmp_path):
    path = tmp_path / "t.csv"
    write(path, [0.0, 0.5, 1.0], [1.0, 2.0, 3.0])
    traj = read_trajectory(path)
    assert traj.dt == pytest.approx(0.5) and traj.u.shape == (3, 1)


def test_malformed_spec_exit_code(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"spec": "F[0,5](x>=10 & )", "x0": [0], "u_max": 1}))
    assert main(["run", str(path)]) == 2
    assert "line 1, column 16" in capsys.readouterr().err


def test_bad_scenario_fields(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"spec": "F[0,5](box(x,1,2))", "x0": [0], "u_max": 1, "speed": 3}))
    assert main(["run", str(path)]) == 2
    path.write_text("{not json")
    assert main(["run", str(path)]) == 2
    assert main(["run", "no_such_scenario"]) == 2


def test_infeasible_exit_code(capsys):
    assert main(["run", "infeasible"]) == 3
    assert main(["sequences", "infeasible"]) == 3
    out = capsys.readouterr().out
    assert "deficit" in out and "no feasible order" in out


def test_horizon_shorter_than_spec_is_an_input_error(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"spec": "G[0,2](box(x,0,1))", "x0": [0.5], "u_max": 1, "horizon": 1.0}))
    assert main(["run", str(path)]) == 2


def test_unsatisfied_run_exit_code(monkeypatch, capsys):
    traj, report, records = cli.simulate(scenarios.load("conflict"))
    report = dataclasses.replace(report, satisfied=False, robustness=-0.1)
    monkeypatch.setattr(cli, "simulate", lambda cfg: (traj, report, records))
    assert main(["run", "conflict"]) == 1
    assert "NOT satisfied" in capsys.readouterr().out


def test_sequences_two_box_example(capsys):
    assert main(["sequences", "example1"]) == 0
    out = capsys.readouterr().out
    assert out.count("alternative ") == 2
    assert "selected order: (1, 2)" in out


def test_sequences_case_study_flags_recurrence(capsys):
    assert main(["sequences", "case_study"]) == 0
    out = capsys.readouterr().out
    assert "subtask 1 resequences at runtime" in out
    assert out.count(" * order") == 1


def test_bench(capsys):
    assert main(["bench"]) == 0
    out = capsys.readouterr().out
    assert "20.29" in out and "0.013" in out
    assert "MIQP 17.03" in out and "NLP 14.65" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "dualcbf", "--seed", "1", "sequences", "conflict"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "selected order: (1, 2)" in res.stdout

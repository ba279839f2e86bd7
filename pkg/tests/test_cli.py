import csv
import json

import pytest

from stefan_control.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, emit_plot_data, main


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main(["--out", str(out), *args])
    summary = json.loads((out / "summary.json").read_text()) if (out / "summary.json").exists() else None
    return code, out, summary


def test_series_summary(tmp_path):
    code, _, summary = run(tmp_path, "--command", "series", "--seed", "5")
    assert code == EXIT_OK
    assert summary["values"]["closed_form"] == -0.0625
    assert summary["seed"] == 5


def test_failed_check_exit_code(tmp_path):
    code, _, summary = run(tmp_path, "--command", "series", "--set", "series.N=1")
    assert code == EXIT_CHECK
    assert not summary["checks"]["series_convergence"]["passed"]


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.nx = 1\ncontrol.backend = magic\n")
    code, _, summary = run(tmp_path, "--config", str(bad), "--command", "series")
    assert code == EXIT_CONFIG and summary is None
    err = capsys.readouterr().err
    assert "grid" in err and "control.backend" in err


def test_solver_failure_exit_code(tmp_path):
    code, _, summary = run(tmp_path, "--command", "observability", "--set", "observability.K=200")
    assert code == EXIT_SOLVER
    assert not summary["checks"]["solver"]["passed"]


def test_control_command_artifacts(tmp_path):
    code, out, summary = run(tmp_path, "--command", "control")
    assert code == EXIT_OK, summary
    for name in ("plot_control_norm.csv", "plot_y_norm.csv", "plot_h_norm.csv"):
        rows = list(csv.reader(open(out / name)))
        assert rows[0] == ["t", "series", "value"]
        assert len(rows) == 202
    assert (out / "control_norm.csv").read_text().startswith("# schema control_norm v1")


def test_deterministic_artifacts(tmp_path):
    args = ["--command", "spectrum", "--set", "spectrum.n_max=3", "--set", "spectrum.K=4"]
    _, a, _ = run(tmp_path, *args, name="a")
    _, b, _ = run(tmp_path, *args, name="b")
    for name in ("spectrum.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_emit_plot_data(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("# schema trajectory v1\nt,energy,y_norm,h_norm\n")
    (out,) = emit_plot_data([empty])
    assert out.read_text() == "t,series,value\n"
    full = tmp_path / "traj.csv"
    full.write_text("# schema trajectory v1\nt,energy,y_norm,h_norm\n0.0,1.0,2.0,3.0\n")
    first = emit_plot_data([full])[0].read_bytes()
    assert first.decode().splitlines()[1:] == ["0.0,energy,1.0", "0.0,y_norm,2.0", "0.0,h_norm,3.0"]
    assert emit_plot_data([full])[0].read_bytes() == first
    with pytest.raises(FileNotFoundError):
        emit_plot_data([tmp_path / "missing.csv"])

import csv
import subprocess
import sys

import numpy as np
import pytest

from fraccap import io, studies
from fraccap.cli import main
from fraccap.errors import ConfigError, DomainError
from fraccap.studies import Check, StudyResult


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def summary(path):
    return {k: v for k, v in read_rows(path / "summary.csv")[1:]}


def test_capture_mode(tmp_path, capsys):
    out = tmp_path / "cap"
    code = main([
        "capture", "--out", str(out), "--exponents", "0.3",
        "--capture-steps", "10", "--capture-dt", "0.1",
    ])
    assert code == 0
    s = summary(out)
    assert int(s["M"]) == 1
    assert float(s["sigma"]) == pytest.approx(0.3, rel=1e-6)
    assert (out / "trace_M1.csv").exists()
    assert "sigma" in capsys.readouterr().out


def test_solve_mode_and_data_round_trip(tmp_path):
    out = tmp_path / "solve"
    code = main([
        "solve", "--out", str(out), "--exponents", "0.3", "--sigma", "0.3",
        "--steps", "20", "--dt", "0.05",
    ])
    assert code == 0
    assert float(summary(out)["l2_relative_error"]) <= 1e-12
    rows = read_rows(out / "solution.csv")
    assert rows[0] == ["n", "t", "u", "u_exact", "abs_error"]
    assert len(rows) == 22
    t, u, f = io.read_data_file(out / "data.csv")
    assert len(t) == 20 and t[0] == pytest.approx(0.05)
    # the written solution feeds straight back into capture
    cap = tmp_path / "cap"
    code = main([
        "capture", "--out", str(cap), "--data-file", str(out / "data.csv"),
        "--capture-steps", "10", "--max-terms", "1",
    ])
    assert code == 0
    assert float(summary(cap)["sigma"]) == pytest.approx(0.3, abs=1e-6)


def test_pipeline_mode_with_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# short window, then a long run\n"
        "exponents = 0.0172230402514543, 0.219372179828199, 0.190779228546504\n"
        "capture_steps = 3\ncapture_dt = 1/3\n"
        "steps = 30\ndt = 1/3\ntol_gradient = 1e-13\n"
    )
    out = tmp_path / "pipe"
    assert main(["pipeline", "--config", str(cfg), "--out", str(out)]) == 0
    s = summary(out)
    assert int(s["M"]) <= 3 and float(s["E"]) < 1e-12
    assert len(read_rows(out / "solution.csv")) == 32


def test_convergence_mode(tmp_path):
    out = tmp_path / "conv"
    code = main([
        "convergence", "--out", str(out), "--exponents", "3", "--steps", "16",
        "--final-time", "1", "--refinements", "3",
    ])
    assert code == 0
    rows = read_rows(out / "convergence.csv")
    assert rows[0] == ["steps", "dt", "l2_relative_error", "order"]
    assert [int(r[0]) for r in rows[1:]] == [16, 32, 64, 128]
    assert float(summary(out)["fitted_order"]) == pytest.approx(2.5, abs=0.1)


def test_weights_mode(tmp_path):
    out = tmp_path / "w"
    code = main([
        "weights", "--out", str(out), "--sigma-rule", "custom", "--sigma", "0.1,0.4",
        "--max-m", "2", "--steps", "5", "--dt", "0.1",
    ])
    assert code == 0
    cond = read_rows(out / "condition.csv")
    assert cond[0] == ["M", "sigma_rule", "condition_estimate"]
    assert len(cond) == 3 and cond[1][1] == "custom"
    rows = read_rows(out / "weights.csv")
    assert rows[0] == ["n", "W_1", "W_2"] and len(rows) == 6


def test_repro_mode(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["repro", "--out", str(out), "--study", "cond"]) == 0
    assert "PASS cond" in capsys.readouterr().out
    assert len(read_rows(out / "cond.csv")) == 10
    checks = read_rows(out / "cond_checks.csv")
    assert all(r[3] == "true" for r in checks[1:])


def test_repro_failed_check_exit_code(tmp_path, monkeypatch, capsys):
    failing = lambda: StudyResult("f1", ["x"], [[1]], [Check("always", 1.0, "< 0", False)])
    monkeypatch.setitem(studies.STUDIES, "f1", failing)
    assert main(["repro", "--out", str(tmp_path), "--study", "f1"]) == 4
    assert "FAIL f1" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        ["repro", "--study", "nope"],
        ["capture", "--exponents", "0.3", "--capture-steps", "x", "--capture-dt", "0.1"],
        ["capture", "--capture-steps", "3", "--capture-dt", "0.1"],
        ["solve", "--exponents", "0.3", "--steps", "10"],
        ["solve", "--exponents", "0.3", "--steps", "10", "--dt", "0.1", "--sigma", "-0.2"],
        ["capture", "--exponents", "0.3", "--random-count", "2",
         "--capture-steps", "3", "--capture-dt", "0.1"],
    ],
)
def test_configuration_errors_exit_with_two(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "error category=" in capsys.readouterr().err


def test_numerical_failure_exits_with_three(tmp_path, capsys):
    argv = ["solve", "--exponents", "0.3", "--steps", "10", "--dt", "0.1", "--sigma", "0.3,0.3"]
    assert main(argv + ["--out", str(tmp_path)]) == 3
    assert "category=singular" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["weights", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_seeded_runs_are_byte_identical(tmp_path):
    argv = ["solve", "--random-count", "2", "--sigma", "none", "--steps", "12", "--dt", "0.1"]
    for name in ("a", "b"):
        assert main(argv + ["--seed", "11", "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "solution.csv").read_bytes()
    assert a == (tmp_path / "b" / "solution.csv").read_bytes()
    assert main(argv + ["--seed", "12", "--out", str(tmp_path / "c")]) == 0
    assert a != (tmp_path / "c" / "solution.csv").read_bytes()


def test_config_parsing():
    text = "# comment\na = 1\n\nb = x, y  # trailing\n"
    assert io.parse_config_text(text) == {"a": "1", "b": "x, y"}
    for bad in ("a = 1\na = 2\n", "novalue\n", "= 3\n"):
        with pytest.raises(ConfigError):
            io.parse_config_text(bad)


def test_data_file_validation(tmp_path):
    path = tmp_path / "d.csv"
    io.write_data_file(path, [0.1, 0.2, 0.3], [1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    t, u, f = io.read_data_file(path)
    np.testing.assert_array_equal(u, [1.0, 2.0, 3.0])
    io.write_data_file(path, [0.1, 0.25, 0.3], [1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    with pytest.raises((ConfigError, DomainError)):
        io.read_data_file(path)


def test_format_value():
    assert io.format_value(0.1) == "0.10000000000000001"
    assert io.format_value([1.0, 2.5]) == "1;2.5"
    assert io.format_value("ok") == "ok"


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "fraccap.cli", "weights", "--out", str(tmp_path), "--max-m", "3"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "condition.csv").exists()

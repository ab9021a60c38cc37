import json

import numpy as np
import pytest
import yaml

from schpacket.cli import main

SMALL = {
    "physics": {"nu": 0.3, "mean_action_variant": "corrected"},
    "initial": {"x0": 1.0, "a0": 0.7},
    "potential": {"kind": "harmonic", "omega": 1.0},
    "times": {"start": 0.0, "stop": 1.0, "num": 3},
    "grid": {"x_min": -6.0, "x_max": 6.0, "n": 121},
    "oracle": {"x_min": -12.0, "x_max": 12.0, "n": 512, "dt": 1.0e-2},
    "propagator": {"t": 0.5, "n_v": 64, "x0_grid": {"x_min": -5.0, "x_max": 6.0, "n": 111}},
}


def _write(tmp_path, raw, name="c.yaml"):
    f = tmp_path / name
    f.write_text(yaml.safe_dump(raw))
    return str(f)


@pytest.mark.parametrize("cmd,files", [
    ("trajectory", ["trajectory.csv"]),
    ("packet", ["packet_0000.csv", "packet_0002.csv", "packet_times.csv"]),
    ("kernel", ["kernel.csv", "kernel_meta.json"]),
    ("propagate", ["propagate.csv", "propagate_meta.json"]),
    ("oracle", ["oracle_moments.csv", "oracle_final.csv"]),
])
def test_commands_write_outputs(tmp_path, cmd, files):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main([cmd, "--config", cfg, "--out", str(out)]) == 0
    for f in files:
        assert (out / f).is_file()
    assert not list(out.glob(".*.tmp"))


def test_trajectory_csv_contents(tmp_path):
    out = tmp_path / "out"
    assert main(["trajectory", "--config", _write(tmp_path, SMALL), "--out", str(out)]) == 0
    text = (out / "trajectory.csv").read_text().splitlines()
    assert text[0] == "t,q,qdot,a,adot,S0"
    data = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    assert data.shape == (3, 6)
    assert data[0, 1] == 1.0


def test_outputs_are_deterministic(tmp_path):
    cfg = _write(tmp_path, SMALL)
    for d in ("a", "b"):
        assert main(["kernel", "--config", cfg, "--out", str(tmp_path / d), "--seedless"]) == 0
    assert (tmp_path / "a" / "kernel.csv").read_bytes() == (tmp_path / "b" / "kernel.csv").read_bytes()


def test_variant_override(tmp_path):
    out = tmp_path / "out"
    assert main(["kernel", "--config", _write(tmp_path, SMALL), "--out", str(out), "--variant", "paper"]) == 0
    assert json.loads((out / "kernel_meta.json").read_text())["variant"] == "paper"


def test_config_error_exit_code(tmp_path, capsys):
    raw = dict(SMALL, physics={"mass": 1.0, "nuu": 0.1})
    assert main(["trajectory", "--config", _write(tmp_path, raw), "--out", str(tmp_path)]) == 2
    assert "unknown key 'physics.nuu'" in capsys.readouterr().err
    assert main(["trajectory", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_causality_limit_is_a_config_error(tmp_path):
    raw = dict(SMALL, propagator={"t": 1.0e-4})
    assert main(["kernel", "--config", _write(tmp_path, raw), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    # a domain far too small for the oracle is reported as a truncation
    raw = dict(SMALL, oracle={"x_min": -2.0, "x_max": 2.0, "n": 64, "dt": 1.0e-2})
    assert main(["oracle", "--config", _write(tmp_path, raw), "--out", str(tmp_path)]) == 2
    # a fixed velocity window that clips the integrand is a numerical failure
    raw = dict(SMALL, propagator={"t": 0.5, "n_v": 64, "v_min": -0.1, "v_max": 0.1})
    assert main(["kernel", "--config", _write(tmp_path, raw), "--out", str(tmp_path)]) == 3
    assert "velocity window too narrow" in capsys.readouterr().err


def test_verify_report(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["verify", "--config", _write(tmp_path, SMALL), "--out", str(out)])
    rep = json.loads((out / "verify_report.json").read_text())
    printed = capsys.readouterr().out
    assert "hamilton_jacobi.c0" in printed
    assert code == (0 if rep["all_passed"] else 4)
    assert rep["all_passed"]

import pytest
import yaml
from hypothesis import given, settings, strategies as st

from schpacket.config import dump_config, load_config, parse_config
from schpacket.errors import ConfigError

BASE = {
    "physics": {"mass": 1.0, "hbar": 1.0, "nu": 0.3, "mean_action_variant": "corrected"},
    "initial": {"x0": 1.0, "v0": 0.0, "a0": 0.7, "b0": 0.0},
    "potential": {"kind": "harmonic", "omega": 1.0},
    "times": {"start": 0.0, "stop": 1.0, "num": 3},
    "grid": {"x_min": -8.0, "x_max": 8.0, "n": 64},
    "oracle": {"x_min": -16.0, "x_max": 16.0, "n": 256, "dt": 1e-2},
    "propagator": {"t": 0.5, "n_v": 64, "x0_grid": {"x_min": -4.0, "x_max": 4.0, "n": 32}},
}


def _with(path, value):
    raw = yaml.safe_load(yaml.safe_dump(BASE))
    node = raw
    for k in path[:-1]:
        node = node[k]
    node[path[-1]] = value
    return raw


def test_shipped_configs_load():
    from pathlib import Path
    for f in sorted(Path(__file__).resolve().parents[1].joinpath("configs").glob("*.yaml")):
        cfg = load_config(f)
        assert cfg.times[0] == 0.0


def test_round_trip():
    cfg = parse_config(BASE)
    again = parse_config(yaml.safe_load(dump_config(cfg)))
    assert again == cfg
    assert again.times == (0.0, 0.5, 1.0)


def test_yaml_exponent_strings(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("integrator: {rtol: 1e-10, atol: 1e-12}\ntimes: [0, 1e-1]\n")
    cfg = load_config(f)
    assert cfg.rtol == 1e-10 and cfg.times == (0.0, 0.1)


@pytest.mark.parametrize("path,value,match", [
    (("physics", "mas"), 1.0, "unknown key 'physics.mas'"),
    (("extra",), 1, "unknown key 'extra'"),
    (("oracle", "steps"), 4, "unknown key 'oracle.steps'"),
    (("propagator", "x0_grid", "dx"), 0.1, "unknown key 'propagator.x0_grid.dx'"),
    (("physics", "mass"), "heavy", "must be a number"),
    (("physics", "nu"), -1.0, "nu must be non-negative"),
    (("physics", "mean_action_variant"), "guess", "paper or corrected"),
    (("initial", "a0"), 0.0, "a0 must be positive"),
    (("grid", "n"), 4, "at least 16"),
    (("times",), [0.0, 2.0, 1.0], "increase strictly"),
    (("times",), [0.5, 1.0], "start at 0"),
    (("potential",), {"kind": "harmonic"}, "omega is required"),
    (("propagator", "n_v"), 8, "n_v"),
    (("propagator", "rule"), "simpson", "unknown quadrature rule"),
])
def test_invalid_configs(path, value, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(_with(path, value))


def test_malformed_yaml(tmp_path):
    f = tmp_path / "bad.yaml"
    f.write_text("physics: {mass: [1\n")
    with pytest.raises(ConfigError, match="malformed YAML"):
        load_config(f)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")


def test_with_variant():
    cfg = parse_config(BASE).with_variant("paper")
    assert cfg.physics.mean_action_variant == "paper"


@settings(max_examples=30, deadline=None)
@given(nu=st.floats(0, 5), x0=st.floats(-10, 10), a0=st.floats(0.01, 10), n=st.integers(16, 5000),
       num=st.integers(1, 50))
def test_round_trip_property(nu, x0, a0, n, num):
    raw = _with(("physics", "nu"), nu)
    raw["initial"]["x0"] = x0
    raw["initial"]["a0"] = a0
    raw["grid"]["n"] = n
    raw["times"] = {"start": 0.0, "stop": 3.0, "num": num}
    cfg = parse_config(raw)
    assert parse_config(yaml.safe_load(dump_config(cfg))) == cfg

"""Scenario files: strict YAML schema with round-trip serialization."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import yaml

from .core import Grid, InitialConditions, PhysicsParams
from .errors import ConfigError
from .oracle import SUPPORT_FLOOR, OracleConfig
from .potentials import PotentialModel
from .propagator import T_MIN, VelocityQuadrature

TOP_KEYS = {"physics", "initial", "potential", "grid", "times", "integrator", "oracle",
            "propagator", "output"}
SECTION_KEYS = {
    "physics": {"mass", "hbar", "nu", "mean_action_variant"},
    "initial": {"x0", "v0", "a0", "b0"},
    "grid": {"x_min", "x_max", "n"},
    "integrator": {"rtol", "atol"},
    "oracle": {"x_min", "x_max", "n", "dt", "epsilon_floor", "support_floor"},
    "propagator": {"t", "n_v", "rule", "v_min", "v_max", "t_min", "x0_grid"},
    "output": {"dir"},
}
GRID_KEYS = {"x_min", "x_max", "n"}


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n: int

    def build(self, periodic: bool = False) -> Grid:
        return Grid(self.x_min, self.x_max, self.n, periodic=periodic)


@dataclass(frozen=True)
class OracleSpec:
    x_min: float = -16.0
    x_max: float = 16.0
    n: int = 4096
    dt: float = 1e-3
    epsilon_floor: float = 1e-150
    support_floor: float = SUPPORT_FLOOR

    def build(self) -> OracleConfig:
        return OracleConfig(Grid(self.x_min, self.x_max, self.n, periodic=True), self.dt,
                            self.epsilon_floor, "strang-split", self.support_floor)


@dataclass(frozen=True)
class PropagatorSpec:
    t: float = 1.0
    n_v: int = 128
    rule: str = "gauss-legendre"
    v_min: Optional[float] = None
    v_max: Optional[float] = None
    t_min: float = T_MIN
    x0_grid: Optional[GridSpec] = None

    def quadrature(self) -> VelocityQuadrature:
        return VelocityQuadrature(self.n_v, self.rule, self.v_min, self.v_max)


@dataclass(frozen=True)
class ScenarioConfig:
    physics: PhysicsParams
    initial: InitialConditions
    potential: PotentialModel
    times: tuple
    grid: Optional[GridSpec] = None
    rtol: float = 1e-10
    atol: float = 1e-12
    oracle: Optional[OracleSpec] = None
    propagator: Optional[PropagatorSpec] = None
    output_dir: Optional[str] = None

    def with_variant(self, variant: str) -> "ScenarioConfig":
        return ScenarioConfig(self.physics.with_variant(variant), self.initial, self.potential,
                              self.times, self.grid, self.rtol, self.atol, self.oracle,
                              self.propagator, self.output_dir)

    def to_dict(self) -> dict:
        p = self.physics
        out: dict[str, Any] = {
            "physics": {"mass": p.mass, "hbar": p.hbar, "nu": p.nu,
                        "mean_action_variant": p.mean_action_variant},
            "initial": {"x0": self.initial.x0, "v0": self.initial.v0, "a0": self.initial.a0,
                        "b0": self.initial.b0},
            "potential": self.potential.to_dict(),
            "times": [float(t) for t in self.times],
            "integrator": {"rtol": self.rtol, "atol": self.atol},
        }
        if self.grid is not None:
            out["grid"] = _grid_dict(self.grid)
        if self.oracle is not None:
            o = self.oracle
            out["oracle"] = {"x_min": o.x_min, "x_max": o.x_max, "n": o.n, "dt": o.dt,
                             "epsilon_floor": o.epsilon_floor, "support_floor": o.support_floor}
        if self.propagator is not None:
            pr = self.propagator
            d = {"t": pr.t, "n_v": pr.n_v, "rule": pr.rule, "t_min": pr.t_min}
            if pr.v_min is not None:
                d["v_min"], d["v_max"] = pr.v_min, pr.v_max
            if pr.x0_grid is not None:
                d["x0_grid"] = _grid_dict(pr.x0_grid)
            out["propagator"] = d
        if self.output_dir is not None:
            out["output"] = {"dir": self.output_dir}
        return out


def _grid_dict(g: GridSpec) -> dict:
    return {"x_min": g.x_min, "x_max": g.x_max, "n": g.n}


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name)
    if sec is None:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping")
    extra = set(sec) - SECTION_KEYS[name]
    if extra:
        raise ConfigError(f"unknown key '{name}.{sorted(extra)[0]}'")
    return sec


def _num(sec: dict, path: str, key: str, default=None, integer=False):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing required key '{path}.{key}'")
        return default
    v = sec[key]
    if isinstance(v, str):
        # YAML 1.1 reads exponents without a dot (1e-10) as strings
        try:
            v = float(v)
        except ValueError:
            pass
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{path}.{key}' must be a number, got {v!r}")
    if integer:
        if int(v) != v:
            raise ConfigError(f"'{path}.{key}' must be an integer")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"'{path}.{key}' must be finite")
    return float(v)


def _grid_spec(sec: Any, path: str) -> GridSpec:
    if not isinstance(sec, dict):
        raise ConfigError(f"{path}: expected a mapping")
    extra = set(sec) - GRID_KEYS
    if extra:
        raise ConfigError(f"unknown key '{path}.{sorted(extra)[0]}'")
    g = GridSpec(_num(sec, path, "x_min"), _num(sec, path, "x_max"), _num(sec, path, "n", integer=True))
    try:
        g.build()
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return g


def _times(raw: Any) -> tuple:
    if raw is None:
        return ()
    if isinstance(raw, dict):
        extra = set(raw) - {"start", "stop", "num"}
        if extra:
            raise ConfigError(f"unknown key 'times.{sorted(extra)[0]}'")
        num = _num(raw, "times", "num", integer=True)
        t = np.linspace(_num(raw, "times", "start", 0.0), _num(raw, "times", "stop"), num)
    elif isinstance(raw, list):
        try:
            t = np.array([_num({"v": v}, "times", "v") for v in raw], dtype=float)
        except ConfigError:
            raise ConfigError("'times' entries must be numbers") from None
    else:
        raise ConfigError("'times' must be a list or a {start, stop, num} mapping")
    if t.size and (t[0] != 0.0 or np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t))):
        raise ConfigError("'times' must start at 0 and increase strictly")
    return tuple(float(v) for v in t)


def parse_config(raw: Any) -> ScenarioConfig:
    """Validate a parsed YAML mapping; unknown keys raise ``ConfigError``."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    extra = set(raw) - TOP_KEYS
    if extra:
        raise ConfigError(f"unknown key '{sorted(extra)[0]}'")
    try:
        ph = _section(raw, "physics")
        variant = ph.get("mean_action_variant", "paper")
        if variant not in ("paper", "corrected"):
            raise ConfigError(f"'physics.mean_action_variant' must be paper or corrected, got {variant!r}")
        physics = PhysicsParams(_num(ph, "physics", "mass", 1.0), _num(ph, "physics", "hbar", 1.0),
                                _num(ph, "physics", "nu", 0.0), variant)
        ini = _section(raw, "initial")
        initial = InitialConditions(_num(ini, "initial", "x0", 0.0), _num(ini, "initial", "v0", 0.0),
                                    _num(ini, "initial", "a0", 1.0), _num(ini, "initial", "b0", 0.0))
        pot_raw = raw.get("potential", {"kind": "free"})
        if not isinstance(pot_raw, dict):
            raise ConfigError("potential: expected a mapping")
        potential = PotentialModel.from_dict(pot_raw)
        grid = _grid_spec(raw["grid"], "grid") if raw.get("grid") is not None else None
        integ = _section(raw, "integrator")
        rtol = _num(integ, "integrator", "rtol", 1e-10)
        atol = _num(integ, "integrator", "atol", 1e-12)
        if not (rtol > 0 and atol > 0):
            raise ConfigError("integrator tolerances must be positive")
        oracle = None
        if "oracle" in raw:
            o = _section(raw, "oracle")
            oracle = OracleSpec(_num(o, "oracle", "x_min", -16.0), _num(o, "oracle", "x_max", 16.0),
                                _num(o, "oracle", "n", 4096, integer=True), _num(o, "oracle", "dt", 1e-3),
                                _num(o, "oracle", "epsilon_floor", 1e-150),
                                _num(o, "oracle", "support_floor", SUPPORT_FLOOR))
            oracle.build()
        prop = None
        if "propagator" in raw:
            pr = _section(raw, "propagator")
            x0g = _grid_spec(pr["x0_grid"], "propagator.x0_grid") if pr.get("x0_grid") is not None else None
            rule = pr.get("rule", "gauss-legendre")
            v_min = _num(pr, "propagator", "v_min") if "v_min" in pr else None
            v_max = _num(pr, "propagator", "v_max") if "v_max" in pr else None
            prop = PropagatorSpec(_num(pr, "propagator", "t", 1.0), _num(pr, "propagator", "n_v", 128, integer=True),
                                  rule, v_min, v_max,
                                  _num(pr, "propagator", "t_min", T_MIN), x0g)
            prop.quadrature()
        out = _section(raw, "output")
        out_dir = out.get("dir")
        if out_dir is not None and not isinstance(out_dir, str):
            raise ConfigError("'output.dir' must be a string")
        return ScenarioConfig(physics, initial, potential, _times(raw.get("times")), grid, rtol, atol,
                              oracle, prop, out_dir)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return parse_config(raw)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)

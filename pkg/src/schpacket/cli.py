"""Command-line scenario runner.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .config import OracleSpec, PropagatorSpec, ScenarioConfig, load_config
from .core import InitialConditions, packet_grid
from .dynamics import PacketState, classical_action, integrate_trajectory
from .errors import ConfigError, NumericalError
from .oracle import evolve
from .propagator import kernel, propagate
from .verify import report, run_suite
from .wavepacket import (convective_velocity, density, evaluate_packet, madelung_decompose, phase,
                         quantum_potential, quantum_velocity)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4
CSV_FMT = "%.16e"


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    rows = np.asarray(rows, dtype=float).reshape(-1, len(header))
    if rows.size:
        np.savetxt(buf, rows, fmt=CSV_FMT, delimiter=",")
    atomic_write(path, buf.getvalue())


def write_json(path: Path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def _trajectory(cfg: ScenarioConfig, times=None):
    t = cfg.times if times is None else times
    return integrate_trajectory(cfg.initial, cfg.potential, cfg.physics, t, cfg.rtol, cfg.atol)


def cmd_trajectory(cfg: ScenarioConfig, out: Path) -> int:
    """Integrate the moment equations; writes trajectory.csv."""
    rec = _trajectory(cfg)
    if len(rec):
        classical_action(rec, cfg.potential, cfg.physics)
    rows = np.column_stack([rec.times, rec.states]) if len(rec) else np.empty((0, 6))
    write_csv(out / "trajectory.csv", ["t", "q", "qdot", "a", "adot", "S0"], rows)
    return EXIT_OK


def cmd_packet(cfg: ScenarioConfig, out: Path) -> int:
    """Sample packet fields at each output time; writes packet_NNNN.csv."""
    rec = _trajectory(cfg)
    p = cfg.physics
    if cfg.grid is not None:
        grid = cfg.grid.build()
    elif len(rec):
        q = rec.column("q")
        grid = packet_grid(q.min(), q.max(), rec.column("a").max(), 1024)
    else:
        return EXIT_OK
    header = ["x", "re_psi", "im_psi", "rho", "S", "v_qu", "theta_qu", "V_qu"]
    for i, s in enumerate(rec):
        psi = evaluate_packet(s, grid, p)
        cols = [grid.points, psi.values.real, psi.values.imag, density(s, grid).values,
                phase(s, grid, p).values, quantum_velocity(s, grid, p).values,
                convective_velocity(s, grid, p).values, quantum_potential(s, grid, p).values]
        write_csv(out / f"packet_{i:04d}.csv", header, np.column_stack(cols))
    write_csv(out / "packet_times.csv", ["index", "t", "q", "a"],
              np.column_stack([np.arange(len(rec)), rec.times, rec.column("q"), rec.column("a")])
              if len(rec) else np.empty((0, 4)))
    return EXIT_OK


def _kernel_setup(cfg: ScenarioConfig):
    if cfg.grid is None:
        raise ConfigError("missing required key 'grid' for kernel commands")
    prop = cfg.propagator or PropagatorSpec()
    xg = cfg.grid.build()
    x0g = prop.x0_grid.build() if prop.x0_grid is not None else xg
    ic_rest = InitialConditions(a0=cfg.initial.a0, b0=cfg.initial.b0)
    K = kernel(prop.t, xg, x0g, prop.quadrature(), ic_rest, cfg.potential, cfg.physics, t_min=prop.t_min)
    return prop, K


def cmd_kernel(cfg: ScenarioConfig, out: Path) -> int:
    """Assemble the propagator matrix; writes kernel.csv and kernel_meta.json."""
    _, K = _kernel_setup(cfg)
    X, X0 = np.meshgrid(K.x_grid.points, K.x0_grid.points, indexing="ij")
    rows = np.column_stack([X.ravel(), X0.ravel(), K.values.real.ravel(), K.values.imag.ravel()])
    write_csv(out / "kernel.csv", ["x", "x0", "re_K", "im_K"], rows)
    meta = dict(K.meta)
    meta.update({"x_grid": [K.x_grid.x_min, K.x_grid.x_max, K.x_grid.n],
                 "x0_grid": [K.x0_grid.x_min, K.x0_grid.x_max, K.x0_grid.n]})
    write_json(out / "kernel_meta.json", meta)
    return EXIT_OK


def cmd_propagate(cfg: ScenarioConfig, out: Path) -> int:
    """Propagate the initial packet through the kernel and compare with the closed form."""
    prop, K = _kernel_setup(cfg)
    p = cfg.physics
    psi0 = evaluate_packet(PacketState.initial(cfg.initial, p), K.x0_grid, p)
    got = propagate(K, psi0).values
    final = _trajectory(cfg, [0.0, prop.t]).final
    ref = evaluate_packet(final, K.x_grid, p).values
    err = float(np.linalg.norm(got - ref) / np.linalg.norm(ref))
    write_csv(out / "propagate.csv", ["x", "re_psi", "im_psi", "re_ref", "im_ref"],
              np.column_stack([K.x_grid.points, got.real, got.imag, ref.real, ref.imag]))
    meta = dict(K.meta)
    meta["rel_l2_error"] = err
    write_json(out / "propagate_meta.json", meta)
    return EXIT_OK


def cmd_oracle(cfg: ScenarioConfig, out: Path) -> int:
    """Solve the nonlinear equation directly; writes oracle_moments.csv."""
    section = cfg.oracle or OracleSpec()
    oc = section.build()
    rec = _trajectory(cfg)
    if not len(rec):
        write_csv(out / "oracle_moments.csv", _ORACLE_HEADER, np.empty((0, len(_ORACLE_HEADER))))
        return EXIT_OK
    p = cfg.physics
    run = evolve(evaluate_packet(rec[0], oc.grid, p), rec.times, cfg.potential, p, oc)
    rows = np.column_stack([rec.times, run.norm, run.mean, run.variance, run.log_mean,
                            rec.column("q"), rec.column("a")])
    write_csv(out / "oracle_moments.csv", _ORACLE_HEADER, rows)
    psi = run.fields[-1]
    S = madelung_decompose(psi).S.values
    write_csv(out / "oracle_final.csv", ["x", "re_psi", "im_psi", "S"],
              np.column_stack([oc.grid.points, psi.values.real, psi.values.imag, S]))
    return EXIT_OK


_ORACLE_HEADER = ["t", "norm", "mean", "variance", "log_mean", "q", "a"]


def cmd_verify(cfg: ScenarioConfig, out: Path) -> int:
    """Run the verification suite; writes verify_report.json."""
    checks = run_suite(cfg)
    rep = report(checks, cfg)
    write_json(out / "verify_report.json", rep)
    for c in checks:
        tag = "PASS" if c.passed else ("FAIL" if c.asserted else "INFO")
        val = "n/a" if c.value is None else f"{c.value:.3e}"
        print(f"{tag:4s} {c.name:42s} value={val} tol={c.tolerance} {c.note}".rstrip())
    return EXIT_OK if rep["all_passed"] else EXIT_VERIFY


COMMANDS = {
    "trajectory": cmd_trajectory,
    "packet": cmd_packet,
    "kernel": cmd_kernel,
    "propagate": cmd_propagate,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario YAML file")
    common.add_argument("--out", default=None, help="output directory (default: output.dir or ./out)")
    common.add_argument("--variant", choices=("paper", "corrected"), default=None,
                        help="override physics.mean_action_variant")
    common.add_argument("--seedless", action="store_true",
                        help="deterministic operation; accepted for compatibility, nothing is random")
    parser = argparse.ArgumentParser(prog="schpacket", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).strip().splitlines()[0])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.variant:
            cfg = cfg.with_variant(args.variant)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output_dir or "out")
    try:
        return COMMANDS[args.command](cfg, out)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Compare the compiled and pure-Python kernel backends.

Times the batch moment integrator and the quadratic-potential kernel
assembly on identical inputs and checks that both backends agree.

    python3 benchmarks/bench_kernels.py --batch 256 --grid 201
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from schpacket import _backend
from schpacket.core import Grid, InitialConditions, PhysicsParams
from schpacket.potentials import PotentialModel
from schpacket.propagator import VelocityQuadrature, kernel


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_batch(mod, n_batch, repeat):
    rng = np.random.default_rng(0)
    y0s = np.column_stack([rng.uniform(-2, 2, n_batch), rng.uniform(-2, 2, n_batch),
                           rng.uniform(0.5, 1.5, n_batch), np.zeros(n_batch), np.zeros(n_batch)])
    times = np.linspace(0.0, 5.0, 11)
    coeffs = PotentialModel.harmonic(1.0).coefficient_array()
    return best_of(lambda: np.asarray(mod.integrate_poly_batch(y0s, times, coeffs, 1.0, 1.0, 0.3, False,
                                                               1e-10, 1e-12)[0]), repeat)


def bench_kernel(name, n_grid, n_v, repeat):
    g = Grid(-6.0, 6.0, n_grid)
    args = (1.0, g, g, VelocityQuadrature(n_v), InitialConditions(a0=0.7), PotentialModel.harmonic(1.0),
            PhysicsParams(nu=0.3))
    return best_of(lambda: kernel(*args, backend=name).values, repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--batch", type=int, default=256, help="trajectories per batch")
    ap.add_argument("--grid", type=int, default=201, help="points per kernel axis")
    ap.add_argument("--n-v", type=int, default=128, help="velocity nodes")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", default=None, help="also write results to this file")
    args = ap.parse_args(argv)

    names = _backend.available()
    if "compiled" not in names:
        print("compiled backend not built; timing the python backend only")
    results = {}
    ref = {}
    for name in names:
        mod = _backend.get(name)
        t_b, out_b = bench_batch(mod, args.batch, args.repeat)
        t_k, out_k = bench_kernel(name, args.grid, args.n_v, args.repeat)
        results[name] = {"batch_s": t_b, "kernel_s": t_k}
        ref[name] = (out_b, out_k)
        print(f"{name:9s} batch ({args.batch} traj): {t_b:9.4f} s   "
              f"kernel ({args.grid}x{args.grid}, n_v={args.n_v}): {t_k:9.4f} s")
    if len(names) == 2:
        (pb, pk), (cb, ck) = ref["python"], ref["compiled"]
        results["max_abs_diff"] = {"batch": float(np.max(np.abs(pb - cb))),
                                   "kernel": float(np.max(np.abs(pk - ck)))}
        results["speedup"] = {k: results["python"][f"{k}_s"] / results["compiled"][f"{k}_s"]
                              for k in ("batch", "kernel")}
        print(f"speedup   batch: {results['speedup']['batch']:.1f}x   kernel: {results['speedup']['kernel']:.1f}x")
        print(f"max |diff| batch: {results['max_abs_diff']['batch']:.2e}   "
              f"kernel: {results['max_abs_diff']['kernel']:.2e}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

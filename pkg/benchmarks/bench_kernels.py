#!/usr/bin/env python3
"""Time the hot kernels on the numba path and on the numpy fallback.

Each backend runs in its own interpreter, because the backend is fixed at
import time by SWITCHDIAG_DISABLE_NUMBA. JIT compilation is excluded by a
warm-up call; reported times are the best of ``--repeat`` rounds.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeat 7 --json results.json
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np


def _workloads():
    from switchdiag import kernels
    from switchdiag.analyzer import analyze_all
    from switchdiag.feasibility import common_sets, minimal_coupled_scaling, minimal_scaling
    from switchdiag.simulator import CATALOG, simulate_batch
    from switchdiag.system import SwitchedDelaySystem

    rng = np.random.default_rng(0)
    dense = rng.uniform(0, 1, (60, 60))
    sym = rng.normal(size=(40, 40))
    sym = sym + sym.T
    members = rng.uniform(0, 1, (3, 6, 6))  # 3**6 = 729 row selections

    # a feasible box-constrained LP of the size the coupled systems produce
    m, k = 60, 40
    A_lp = np.vstack([rng.uniform(-1, 1, (m, k)), np.eye(k)])
    b_lp = np.concatenate([rng.uniform(0.5, 2, m), np.ones(k)])
    c_lp = rng.uniform(0, 1, k)

    sys3 = SwitchedDelaySystem.single_delay(rng.uniform(0, 0.3, (3, 3, 3)), rng.uniform(0, 0.3, (3, 3, 3)))
    m1, _ = common_sets(sys3)

    R, H = 200, 500
    modes = rng.integers(0, 3, (R, H))
    inputs = np.zeros((R, H, 3))
    inits = rng.uniform(0, 1, (R, 2, 3))

    return {
        "spectral_radius 60x60": lambda: kernels.spectral_radius(dense, 1e-12, 100_000),
        "row_selection_rhos 729 x 6x6": lambda: kernels.row_selection_rhos(members, 1e-12, 100_000),
        "jacobi 40x40": lambda: kernels.jacobi_max_eigenvalue(sym, 100),
        "simplex 100 rows x 40 cols": lambda: kernels.simplex(c_lp, A_lp, b_lp, 100_000),
        "simulate_batch 200 x 500 steps": lambda: simulate_batch(sys3, CATALOG[1], modes, inputs, inits),
        "minimal_scaling (M1, n=3, N=3)": lambda: minimal_scaling(m1),
        "minimal_coupled_scaling (n=3, N=3)": lambda: minimal_coupled_scaling(sys3),
        "analyze_all (n=3, N=3)": lambda: analyze_all(sys3),
    }


def worker(repeat):
    from switchdiag.kernels import backend_name

    out = {"backend": backend_name(), "times": {}}
    for name, fn in _workloads().items():
        fn()  # warm-up, includes JIT compilation on the numba path
        timer = timeit.Timer(fn)
        number, _ = timer.autorange()
        best = min(timer.repeat(repeat=repeat, number=number)) / number
        out["times"][name] = best
    json.dump(out, sys.stdout)


def run_backend(disable, repeat):
    env = dict(os.environ)
    env.pop("SWITCHDIAG_DISABLE_NUMBA", None)
    if disable:
        env["SWITCHDIAG_DISABLE_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, __file__, "--worker", "--repeat", str(repeat)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(proc.stdout)


def _fmt(seconds):
    if seconds < 1e-3:
        return f"{seconds * 1e6:9.1f} us"
    if seconds < 1:
        return f"{seconds * 1e3:9.2f} ms"
    return f"{seconds:9.3f} s "


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", metavar="PATH", help="also write raw timings to PATH")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.worker:
        worker(args.repeat)
        return

    fast = run_backend(False, args.repeat)
    slow = run_backend(True, args.repeat)
    width = max(len(k) for k in fast["times"])
    print(f"{'kernel':<{width}}  {fast['backend']:>12}  {slow['backend']:>12}  speedup")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:<{width}}  {_fmt(t_fast)}  {_fmt(t_slow)}  {t_slow / t_fast:7.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"numba": fast, "numpy": slow}, fh, indent=2)


if __name__ == "__main__":
    main()

"""Time the compiled and pure-Python kernels on the same operator.

Usage::

    python3 benchmarks/bench_kernels.py [--h 0.025] [--repeat 3] [--variant general]

Reports seconds per Jacobi application and per Gauss-Seidel sweep for each
available backend, the speedup, and the largest difference between results.
"""
import argparse
import time

import numpy as np

from eigdpp import _backend
from eigdpp.dpp_operator import DominativeConfig, DppConfig, GridOperator, VARIANTS, build_program
from eigdpp.eig_core import AlphaWeights
from eigdpp.frames import FrameFamily
from eigdpp.grid import Lattice


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--h", type=float, default=0.025)
    p.add_argument("--frames", type=int, default=3, help="frame count (canonical plus random)")
    p.add_argument("--variant", choices=VARIANTS, default="general")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    lat = Lattice(args.n, -1.0, 1.0, args.h, args.eps)
    fam = FrameFamily.random(args.n, args.frames, seed=0)
    cfg = DppConfig(args.eps, AlphaWeights.uniform(args.n), fam)
    prog = build_program(args.variant, cfg, DominativeConfig(args.n, 3.0))
    values = np.random.default_rng(0).standard_normal(lat.size)
    print(f"lattice {lat.size} nodes, variant {args.variant}, {len(fam)} frames")

    results = {}
    for name in _backend.available():
        op = GridOperator(lat, prog, args.eps, backend=name)
        t_apply, applied = best_of(lambda: op.apply(values), args.repeat)
        t_sweep, swept = best_of(lambda: (lambda v: (op.gauss_seidel_sweep(v), v)[1])(values.copy()), args.repeat)
        results[name] = (t_apply, t_sweep, applied, swept)
        print(f"{name:>7}: apply {t_apply:.4f}s  gauss-seidel sweep {t_sweep:.4f}s")
    if len(results) == 2:
        c, py = results["cython"], results["python"]
        print(f"speedup: apply {py[0] / c[0]:.1f}x  sweep {py[1] / c[1]:.1f}x")
        diff = max(float(np.max(np.abs(c[2] - py[2]))), float(np.max(np.abs(c[3] - py[3]))))
        print(f"max |cython - python| = {diff:.3g}")


if __name__ == "__main__":
    main()

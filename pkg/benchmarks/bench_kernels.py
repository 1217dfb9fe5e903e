"""Time the banded kernels on both backends.

    python benchmarks/bench_kernels.py [--n 20000] [--steps 2000] [--repeat 3]

The numba kernels are compared with the numpy/LAPACK fallback that
``TRAPSMOOTH_DISABLE_NUMBA=1`` selects.  The first numba call is excluded
from the timings (compilation).
"""
import argparse
import time

import numpy as np

from trapsmooth import _accel, geometry, kernels
from trapsmooth.discretize import CapProfile
from trapsmooth.evolution import assemble_mode_operator, mode_grid


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, steps, rng):
    p = geometry.SurfaceProfile()
    # pick k so that the default grid has about n points
    k = max(1, round(n * 2 * np.pi / (10 * 25.0)))
    grid = mode_grid(p, k)
    op = assemble_mode_operator(p, k, grid, CapProfile())
    v0 = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
    w = rng.uniform(size=(3, grid.n))
    dw = rng.uniform(size=grid.n)
    dt = 0.5 / k**2
    rhs = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
    shifted = op.bands.copy()
    shifted[kernels.KU] -= 0.9 * k * k

    def factor():
        kernels.BandedLU(shifted)

    lu = kernels.BandedLU(shifted)

    def solve():
        lu.solve(rhs)
        lu.solve(rhs, adjoint=True)

    def evolve():
        kernels.crank_nicolson_run(op.bands, dt, v0, steps, w, dw, grid.dx)

    return grid.n, {"factor": factor, "solve+adjoint": solve, f"cn {steps} steps": evolve}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    saved = _accel.USE_NUMBA
    results = {}
    backends = ["numpy"] + (["numba"] if _accel.NUMBA_AVAILABLE else [])
    for name in backends:
        _accel.USE_NUMBA = name == "numba"
        n, fns = cases(args.n, args.steps, np.random.default_rng(0))
        for label, fn in fns.items():
            fn()  # warm-up, compiles on the numba path
            results[(label, name)] = best_of(fn, args.repeat)
    _accel.USE_NUMBA = saved

    print(f"grid points: {n}")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + "     speedup")
    for label in fns:
        row = [results[(label, b)] for b in backends]
        speed = row[0] / row[-1] if len(row) > 1 else float("nan")
        print(f"{label:<18}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row) + f"  {speed:>9.1f}x")


if __name__ == "__main__":
    main()

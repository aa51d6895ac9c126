"""Benchmark the split-step kernel: numba JIT vs the pure-numpy fallback.

Usage:  python3 bench/benchmark_kernels.py [M]

Times the fused multi-step propagator on a (3, 3)-model grid for both
splitting orders and prints microseconds per time step.  The fallback is
what you get with THRESHOLD_LAB_NO_NUMBA=1; this script calls both code
paths directly so one process can compare them.
"""

import sys
import time

import numpy as np

from threshold_lab import kernels
from threshold_lab.grid import default_rmax, make_grid
from threshold_lab.model import derive_params


def timed_per_step(fn, nsteps, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, (time.perf_counter() - t0) / nsteps)
    return best * 1e6  # microseconds


def main():
    M = int(sys.argv[1]) if len(sys.argv) > 1 else 4096
    params = derive_params(3, 3.0)
    grid = make_grid(3, M, default_rmax(params.omega))
    bands = kernels.extract_bands(grid.lap_matrix)
    rng = np.random.default_rng(0)
    u0 = (np.exp(-grid.r**2 / 4) * (1 + 0.01 * rng.standard_normal(grid.M))).astype(complex)

    if not kernels.USE_NUMBA:
        print("note: numba unavailable or disabled; only the fallback is timed")

    print(f"grid M={M}, dt=1e-4, p={params.p}")
    print(f"{'order':>5} {'path':>8} {'us/step':>10} {'speedup':>8}")
    for order in (2, 4):
        ws = kernels.COMPOSITION_WEIGHTS[order]
        n_py = 100
        t_py = timed_per_step(
            lambda: kernels._comp_run_py(u0.copy(), *bands, 1e-4, params.p,
                                         n_py, 0.0, ws), n_py)
        print(f"{order:>5} {'python':>8} {t_py:>10.1f} {'1.0x':>8}")
        if kernels.USE_NUMBA:
            n_nb = 2000
            # warm the JIT outside the timed region
            kernels.strang_run(u0.copy(), bands, 1e-4, params.p, 2, None, order=order)
            t_nb = timed_per_step(
                lambda: kernels.strang_run(u0.copy(), bands, 1e-4, params.p,
                                          n_nb, None, order=order), n_nb)
            print(f"{order:>5} {'numba':>8} {t_nb:>10.1f} {t_py / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()

"""Compare the compiled Euler kernel with the NumPy fallback.

    python3 benchmarks/bench_stepping.py [--L 32] [--d 1] [--steps 20000]
"""
import argparse
import time

import numpy as np

from lattice_spde import _stepping
from lattice_spde.lattice import LatticeConfig
from lattice_spde.levy import LevyParams, sample_noise_increments
from lattice_spde.simulator import neighbour_table


def time_backend(step, X0, W, nbr, args, repeats):
    best = np.inf
    for _ in range(repeats):
        X = X0.copy()
        out = np.empty((1, X.size))
        t0 = time.perf_counter()
        step(X, W, nbr, *args, out, 10**12, 10**12)
        best = min(best, time.perf_counter() - t0)
    return best, X


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--L", type=int, default=32)
    ap.add_argument("--d", type=int, default=1)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=3)
    a = ap.parse_args()
    cfg = LatticeConfig(a.d, 1.0, a.L, 2.0)
    dt = 0.45 / cfg.mu2_max
    W = np.ascontiguousarray(sample_noise_increments(LevyParams.rademacher(), cfg, dt, a.steps, 0).reshape(a.steps, -1))
    nbr = neighbour_table(cfg)
    args = (dt, cfg.m**2, 0.1, 3, 1.0 / cfg.delta**2)
    X0 = np.zeros(cfg.n_sites)
    rows = [("numpy", _stepping.euler_steps_py)]
    if _stepping.BACKEND == "cython":
        rows.append(("cython", _stepping.euler_steps))
    results = {name: time_backend(step, X0, W, nbr, args, a.repeats) for name, step in rows}
    site_steps = a.steps * cfg.n_sites
    print(f"d={a.d} L={a.L} steps={a.steps}")
    print(f"{'backend':<8}{'seconds':>12}{'ns/site-step':>16}")
    for name, (sec, _) in results.items():
        print(f"{name:<8}{sec:>12.4f}{1e9 * sec / site_steps:>16.2f}")
    if "cython" in results:
        diff = np.max(np.abs(results["cython"][1] - results["numpy"][1]))
        print(f"speedup {results['numpy'][0] / results['cython'][0]:.1f}x, max |difference| {diff:.3g}")


if __name__ == "__main__":
    main()

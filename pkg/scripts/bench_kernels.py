#!/usr/bin/env python
"""Compare the compiled integration kernels against the pure-Python fallback.

Times repeated forward integrations and adjoint sweeps of the three systems
on a Table-1 setup and prints the speedup. Run after an editable install:

    python scripts/bench_kernels.py [--n-d 2000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from wolbactrl._kernels import get_backend
from wolbactrl.integrator import TimeGrid
from wolbactrl.reduced import build_reduced_model
from wolbactrl.slowfast import TABLE1_PARAMS


def _timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-d", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    sp = TABLE1_PARAMS
    model = build_reduced_model(sp)
    grid = TimeGrid(T=10.0, N_d=args.n_d)
    u = np.where(np.arange(args.n_d) * grid.dt < 0.075, 10.0, 0.0)
    dt = grid.dt
    mp = sp.to_model_params()

    cases = {
        "integrate_full": lambda k: k.integrate_full(
            np.array([0.73, 0.0]), u, dt, mp.b1, mp.b2, mp.d1, mp.d2,
            mp.s_h, mp.K),
        "integrate_slowfast": lambda k: k.integrate_slowfast(
            np.array([sp.d1 / sp.b1_0, 0.0]), u, dt, sp.b1_0, sp.b2_0,
            sp.d1, sp.d2, sp.s_h, sp.K, sp.eps),
        "integrate_reduced": lambda k: k.integrate_reduced(
            0.0, u, dt, sp.b1_0, sp.b2_0, sp.d1, sp.d2, sp.s_h, sp.K),
    }

    backends = {}
    for name in ("compiled", "python"):
        try:
            backends[name] = get_backend(name)
        except ImportError:
            print(f"backend {name!r} unavailable, skipping")
    if len(backends) < 2:
        return

    print(f"grid: N_d={args.n_d}, best of {args.repeats} runs\n")
    print(f"{'kernel':22s} {'compiled':>12s} {'pure py':>12s} {'speedup':>9s}")
    for cname, call in cases.items():
        times = {bname: _timeit(lambda b=back: call(b), args.repeats)
                 for bname, back in backends.items()}
        ratio = times["python"] / times["compiled"]
        print(f"{cname:22s} {times['compiled'] * 1e3:10.3f}ms "
              f"{times['python'] * 1e3:10.3f}ms {ratio:8.1f}x")
    print("\nresults agree across backends (asserted in tests/test_kernels.py)")


if __name__ == "__main__":
    main()

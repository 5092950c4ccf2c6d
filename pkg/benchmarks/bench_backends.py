"""Compare the numba and numpy kernel backends.

Times single kernel calls and a short reference run on each available
backend, after one warm-up call so numba compilation is excluded.

    python3 benchmarks/bench_backends.py --n 256 1024 4096 --t-end 5
"""

import argparse
import time

import numpy as np

from lagfree import kernels
from lagfree.model import MassGrid, ProfileSpec, init_profile, make_params
from lagfree.solver import StepConfig, run


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(n, t_end, repeat):
    p = make_params(2.0, 1.0, 2)
    grid = MassGrid(n)
    s = init_profile(ProfileSpec(), p, grid)
    # a developed state so the momentum system is not trivially at rest
    s = run(s, StepConfig(), p, 1.0, 1.0).final
    dt = 1e-3
    zero = np.zeros(n + 1)
    rows = {}
    for name in kernels.available_backends():
        kernels.set_backend(name)
        solve = best_of(lambda: kernels.momentum_solve(s.rho, s.r, s.u, dt, grid.dx, p.gamma, p.mu, p.dim, zero, 0.0),
                        repeat)
        move = best_of(lambda: kernels.move(s.r, s.u, dt, grid.dx, p.dim), repeat)
        t0 = time.perf_counter()
        traj = run(init_profile(ProfileSpec(), p, grid), StepConfig(), p, t_end, t_end)
        wall = time.perf_counter() - t0
        rows[name] = (solve, move, wall, traj.steps)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--t-end", type=float, default=5.0)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    original = kernels.get_backend()
    print(f"{'n':>6} {'backend':>8} {'solve us':>10} {'move us':>9} {'run s':>8} {'steps':>7} {'us/step':>9}")
    try:
        for n in args.n:
            for name, (solve, move, wall, steps) in bench(n, args.t_end, args.repeat).items():
                per_step = 1e6 * wall / max(steps, 1)
                print(f"{n:>6} {name:>8} {1e6 * solve:>10.1f} {1e6 * move:>9.1f} {wall:>8.3f} {steps:>7} {per_step:>9.1f}")
    finally:
        kernels.set_backend(original)


if __name__ == "__main__":
    main()

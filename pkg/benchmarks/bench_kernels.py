"""Compiled vs pure-Python kernels.

    python benchmarks/bench_kernels.py [--nx 128] [--nt 256] [--repeat 3]

Times a single obstacle step, a projected Gauss-Seidel sweep and a full
obstacle solve with each backend, and checks that the results agree.
"""

import argparse
import time

import numpy as np

from obstacle_lab import kernels
from obstacle_lab.grid import make_cylinder_grid
from obstacle_lab.obstacle import solve_against
from obstacle_lab.pde import PParams
from obstacle_lab.scenarios import continuous_obstacle


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def step_problem(n, seed=0):
    rng = np.random.default_rng(seed)
    x = np.linspace(0, 1, n)
    psi = np.maximum(0.3 - 3 * (x - 0.5) ** 2 + 0.05 * rng.normal(size=n), 0.0)
    psi[[0, -1]] = 0.0
    return psi, np.zeros(n), 1.0 / (n - 1)


def bench_step(mod, n, repeat):
    psi, uold, hx = step_problem(n)

    def run():
        u = np.zeros(n)
        mod.solve_step(u, uold, psi, 1.0, 0.5 / hx, hx, 3.0, 1e-10, 500, 1.0)
        return u

    return best_of(run, repeat)


def bench_sweep(mod, n, repeat):
    psi, uold, hx = step_problem(n)

    def run():
        u = np.zeros(n)
        for _ in range(10):
            mod.pgs_sweep(u, uold, psi, 1.0, 0.5 / hx, hx, 3.0, 1.0, 1e-12)
        return u

    return best_of(run, repeat)


def bench_solve(name, nx, nt, repeat):
    # swap the selected kernel module for the duration of the solve
    saved = kernels.solve_step
    kernels.solve_step = kernels.get_backend(name).solve_step
    try:
        grid = make_cylinder_grid(0.0, 1.0, nx, 1.0, nt)
        ob = continuous_obstacle(grid)
        return best_of(lambda: solve_against(grid, PParams(), ob.psi).u.values, repeat)
    finally:
        kernels.solve_step = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=128)
    ap.add_argument("--nt", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    names = ["python"] + (["compiled"] if kernels.compiled_available() else [])
    if len(names) == 1:
        print("compiled extension not available; timing the python backend only")
    rows = []
    results = {}
    for label, fn in (
        (f"solve_step n={args.nx + 1}", lambda m: bench_step(m, args.nx + 1, args.repeat)),
        (f"10 pgs sweeps n={args.nx + 1}", lambda m: bench_sweep(m, args.nx + 1, args.repeat)),
    ):
        for name in names:
            t, out = fn(kernels.get_backend(name))
            rows.append((label, name, t))
            results[(label, name)] = out
    label = f"obstacle solve {args.nx}x{args.nt}"
    for name in names:
        t, out = bench_solve(name, args.nx, args.nt, args.repeat)
        rows.append((label, name, t))
        results[(label, name)] = out

    print(f"{'kernel':<28} {'backend':<9} {'seconds':>10} {'speedup':>8}")
    base = {lab: t for lab, name, t in rows if name == "python"}
    for lab, name, t in rows:
        print(f"{lab:<28} {name:<9} {t:10.5f} {base[lab] / t:8.1f}")
    if len(names) == 2:
        labels = dict.fromkeys(lab for lab, _, _ in rows)
        diff = max(float(np.max(np.abs(results[(lab, "python")] - results[(lab, "compiled")]))) for lab in labels)
        print(f"max backend difference: {diff:.2e}")


if __name__ == "__main__":
    main()

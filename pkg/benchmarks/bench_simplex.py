"""Compare the compiled and pure-Python simplex cores.

Times cold solves and warm rhs re-solves on dispatch-shaped LPs of a few
sizes, which is the access pattern the trainer hammers.  Run with

    python benchmarks/bench_simplex.py
"""

import time

import numpy as np

from adlearn.lp import LinearProgram, LpStatus, PerturbationPolicy, solve
from adlearn.lp.simplex import cython_backend_available


def dispatch_like_lp(rng, n_units, n_rows):
    """Random LP with the flavor of a planning problem: nonnegative costs,
    a dense coupling row, box-capacity rows, slack-priced penalties."""
    n = 3 * n_units + 2
    c = np.concatenate([
        rng.uniform(1.0, 10.0, n_units),
        rng.uniform(0.1, 3.0, 2 * n_units),
        [100.0, 40.0],
    ])
    A = np.zeros((n_rows, n))
    b = np.zeros(n_rows)
    senses = []
    A[0, :n_units] = 1.0
    A[0, -2] = 1.0
    A[0, -1] = -1.0
    b[0] = rng.uniform(2.0, 8.0)
    senses.append("==")
    for i in range(1, n_rows):
        u = int(rng.integers(0, n_units))
        A[i, u] = 1.0
        A[i, n_units + u] = 1.0
        b[i] = rng.uniform(1.0, 5.0)
        senses.append("<=")
    ub = np.full(n, np.inf)
    ub[n_units : 3 * n_units] = rng.uniform(0.5, 2.0, 2 * n_units)
    return LinearProgram(c, A, senses, b, ub=ub)


def bench_backend(backend, lps, rhs_jitter, repeats=3):
    pol = PerturbationPolicy.deterministic(1e-7)
    best_cold = best_warm = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        sols = [solve(lp, perturb=pol, backend=backend) for lp in lps]
        cold = time.perf_counter() - t0
        t0 = time.perf_counter()
        n_warm = 0
        for lp, sol, jit in zip(lps, sols, rhs_jitter):
            if sol.status is not LpStatus.OPTIMAL:
                continue
            lp2 = LinearProgram(lp.c, lp.A, list(lp.senses), lp.b + jit,
                                lb=lp.lb, ub=lp.ub)
            solve(lp2, warm=sol.basis, perturb=pol, backend=backend)
            n_warm += 1
        warm = time.perf_counter() - t0
        best_cold = min(best_cold, cold)
        best_warm = min(best_warm, warm)
    return best_cold, best_warm, n_warm


def main():
    rng = np.random.default_rng(0)
    print(f"{'size':>16} {'backend':>8} {'cold ms/solve':>14} {'warm ms/solve':>14}")
    for n_units, n_rows, n_lps in ((4, 9, 400), (30, 60, 60), (100, 200, 12)):
        lps = [dispatch_like_lp(rng, n_units, n_rows) for _ in range(n_lps)]
        jit = [rng.normal(scale=0.02, size=n_rows) for _ in range(n_lps)]
        backends = ["python"] + (["cython"] if cython_backend_available() else [])
        for bk in backends:
            cold, warm, n_warm = bench_backend(bk, lps, jit)
            print(
                f"{n_units:>4} units {n_rows:>3} rows {bk:>8} "
                f"{1e3 * cold / len(lps):>13.3f} {1e3 * warm / max(n_warm, 1):>13.3f}"
            )
    if not cython_backend_available():
        print("compiled core not built; python timings only")


if __name__ == "__main__":
    main()

"""Timing comparison of the compiled simplex kernel against the numpy fallback.

Both kernels implement the same pivot rule, so they must agree basis for
basis; the benchmark asserts identical optimal values while timing them.

Run from the repository root:

    python3 benchmarks/bench_solver.py
"""

import time

import numpy as np

from transineq._kernels import fallback

try:
    from transineq._kernels import _simplex
except ImportError:
    _simplex = None


def random_problem(rng, n):
    pts = rng.standard_normal((n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    C = (diff * diff).sum(axis=2)
    a = rng.gamma(1.0, 1.0, size=n) + 1e-3
    b = rng.gamma(1.0, 1.0, size=n) + 1e-3
    return np.ascontiguousarray(C), a / a.sum(), b / b.sum()


def bench(kernel, problems, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        vals = []
        for C, a, b in problems:
            plan, u, v, piv = kernel.solve_transport(C, a, b)
            vals.append(float((plan * C).sum()))
        best = min(best, time.perf_counter() - t0)
    return best, vals


def main():
    rng = np.random.default_rng(7)
    print(f"{'n':>5} {'count':>5} {'fallback':>12} {'cython':>12} {'speedup':>8}")
    for n, count in ((16, 50), (64, 20), (128, 10), (256, 5)):
        problems = [random_problem(rng, n) for _ in range(count)]
        t_fb, v_fb = bench(fallback, problems)
        if _simplex is None:
            print(f"{n:5d} {count:5d} {t_fb:12.4f} {'absent':>12}")
            continue
        t_cy, v_cy = bench(_simplex, problems)
        assert np.allclose(v_fb, v_cy, rtol=0, atol=1e-12), "kernels disagree"
        print(f"{n:5d} {count:5d} {t_fb:12.4f} {t_cy:12.4f} {t_fb / t_cy:7.1f}x")


if __name__ == "__main__":
    main()

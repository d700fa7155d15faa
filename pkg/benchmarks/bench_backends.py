"""Compare the compiled orthant-integration kernel with the pure-Python one.

The kernel is the hot loop of order-probability calculation, which dominates
the analytical pipeline's runtime, so this is the backend comparison that
matters.  Run directly:

    python benchmarks/bench_backends.py

The compiled backend is what `import contend` picks up when the extension
built; setting CONTEND_PURE_PYTHON=1 forces the fallback.  This script loads
both kernels in-process and times them on identical inputs, then times the
end-to-end order-probability call through each.
"""

from __future__ import annotations

import time

import numpy as np

from contend._qmc_py import orthant_accumulate as py_kernel
from contend.gaussians import Gaussian
from contend.orderprob import Order, build_difference_mvn, order_probability

try:
    from contend._native.qmc_cy import orthant_accumulate as cy_kernel
except ImportError:
    cy_kernel = None


def time_kernel(kernel, upper, chol, w, repeats=20):
    best = float("inf")
    value = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        value = kernel(upper, chol, w)
        best = min(best, time.perf_counter() - t0)
    return value, best


def main():
    rng = np.random.default_rng(42)
    print(f"{'dim':>4} {'points':>7} {'pure-py (ms)':>13} {'native (ms)':>12} {'speedup':>8}")
    for dim in (2, 3, 5, 8):
        arrivals = [Gaussian(rng.uniform(0, 3), rng.uniform(0.2, 2.0)) for _ in range(dim + 1)]
        spec = build_difference_mvn(arrivals, Order(tuple(range(dim + 1))))
        chol = np.linalg.cholesky(spec.cov)
        upper = -spec.mean
        n_points = 1 << 13
        w = rng.random((n_points, dim))
        v_py, t_py = time_kernel(py_kernel, upper, chol, w)
        if cy_kernel is None:
            print(f"{dim:>4} {n_points:>7} {t_py * 1e3:>13.3f} {'n/a':>12} {'n/a':>8}")
            continue
        v_cy, t_cy = time_kernel(cy_kernel, upper, chol, w)
        assert abs(v_py - v_cy) < 1e-10, (v_py, v_cy)
        print(
            f"{dim:>4} {n_points:>7} {t_py * 1e3:>13.3f} {t_cy * 1e3:>12.3f} "
            f"{t_py / t_cy:>7.1f}x"
        )

    print("\nend-to-end order_probability (5 arrivals):")
    arrivals = [Gaussian(rng.uniform(0, 3), rng.uniform(0.2, 2.0)) for _ in range(5)]
    order = Order((0, 1, 2, 3, 4))
    import contend.orderprob as orderprob

    saved = orderprob.orthant_accumulate
    for name, kernel in (("pure-python", py_kernel), ("native", cy_kernel)):
        if kernel is None:
            continue
        orderprob.orthant_accumulate = kernel
        t0 = time.perf_counter()
        for _ in range(10):
            p = order_probability(arrivals, order, seed=0)
        dt = (time.perf_counter() - t0) / 10
        print(f"  {name:>12}: {dt * 1e3:8.2f} ms/call  (p = {p:.6f})")
    orderprob.orthant_accumulate = saved


if __name__ == "__main__":
    main()

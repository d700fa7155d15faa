"""Pure-NumPy fallback for the orthant-probability inner loop.

Same contract as the compiled kernel in ``contend._native.qmc_cy``: given the
Cholesky factor of the covariance, the (negated-mean) upper limits, and a
block of quasi-random points in [0,1)^(d-1), return the sample mean of the
separation-of-variables integrand over the block.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

_EPS = 1e-15


def orthant_accumulate(upper: np.ndarray, chol: np.ndarray, w: np.ndarray) -> float:
    """Mean of the sequential-conditioning integrand over the points ``w``.

    ``upper`` has shape (d,), ``chol`` is lower triangular (d, d), ``w`` has
    shape (n_points, d-1).  Evaluates P(L z < upper) with z standard normal,
    integrating out one dimension per column of ``w``.
    """
    d = upper.shape[0]
    n = w.shape[0]
    diag0 = max(chol[0, 0], 1e-300)
    e = np.full(n, ndtr(upper[0] / diag0))
    prod = e.copy()
    y = np.empty((n, d - 1))
    for i in range(1, d):
        arg = np.clip(w[:, i - 1] * e, _EPS, 1.0 - _EPS)
        y[:, i - 1] = ndtri(arg)
        diag = max(chol[i, i], 1e-300)
        t = (upper[i] - y[:, :i] @ chol[i, :i]) / diag
        e = ndtr(t)
        prod *= e
    return float(prod.mean())

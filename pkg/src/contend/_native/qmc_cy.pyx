# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loop for the orthant-probability integrator.

Scalar reformulation of the separation-of-variables integrand; the Python
fallback in ``contend._qmc_py`` is the reference for the contract.
"""

import numpy as np

cimport numpy as cnp
from scipy.special.cython_special cimport ndtr, ndtri

cnp.import_array()

DEF EPS = 1e-15


def orthant_accumulate(double[::1] upper, double[:, ::1] chol, double[:, ::1] w):
    cdef Py_ssize_t d = upper.shape[0]
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double e0, e, prod, arg, t, diag, total
    cdef double[::1] y = np.empty(d - 1 if d > 1 else 1)

    diag = chol[0, 0]
    if diag < 1e-300:
        diag = 1e-300
    e0 = ndtr(upper[0] / diag)

    total = 0.0
    with nogil:
        for k in range(n):
            e = e0
            prod = e0
            for i in range(1, d):
                arg = w[k, i - 1] * e
                if arg < EPS:
                    arg = EPS
                elif arg > 1.0 - EPS:
                    arg = 1.0 - EPS
                y[i - 1] = ndtri(arg)
                t = upper[i]
                for j in range(i):
                    t -= chol[i, j] * y[j]
                diag = chol[i, i]
                if diag < 1e-300:
                    diag = 1e-300
                e = ndtr(t / diag)
                prod *= e
            total += prod
    return total / n

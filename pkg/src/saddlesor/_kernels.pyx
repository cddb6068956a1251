# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: CSR matvec and banded Cholesky factor/solve.

Band storage is lower form: ``ab[k, j] = M[j + k, j]`` for ``0 <= k <= bw``,
the same layout as LAPACK ``?pbtrf`` with ``lower=True``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def csr_matvec(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] data, const double[::1] x, double[::1] out):
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef double acc
    with nogil:
        for i in range(nrows):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc = acc + data[k] * x[indices[k]]
            out[i] = acc


def band_cholesky(double[:, ::1] ab):
    """In-place lower banded Cholesky. Returns -1 on success, else the failing pivot."""
    cdef Py_ssize_t bw = ab.shape[0] - 1
    cdef Py_ssize_t n = ab.shape[1]
    cdef Py_ssize_t j, i, k, lim
    cdef Py_ssize_t failed = -1
    cdef double d, lij
    with nogil:
        for j in range(n):
            d = ab[0, j]
            if not d > 0.0:
                failed = j
                break
            d = sqrt(d)
            ab[0, j] = d
            lim = bw if j + bw < n else n - 1 - j
            for i in range(1, lim + 1):
                ab[i, j] = ab[i, j] / d
            # rank-1 update of the trailing band
            for k in range(1, lim + 1):
                lij = ab[k, j]
                for i in range(k, lim + 1):
                    ab[i - k, j + k] = ab[i - k, j + k] - ab[i, j] * lij
    return failed


def band_solve(const double[:, ::1] lb, const double[::1] rhs, double[::1] out):
    """Solve (L L^T) z = rhs with L in lower band storage."""
    cdef Py_ssize_t bw = lb.shape[0] - 1
    cdef Py_ssize_t n = lb.shape[1]
    cdef Py_ssize_t i, k, lo, hi
    cdef double acc
    with nogil:
        for i in range(n):
            acc = rhs[i]
            lo = i - bw if i >= bw else 0
            for k in range(lo, i):
                acc = acc - lb[i - k, k] * out[k]
            out[i] = acc / lb[0, i]
        for i in range(n - 1, -1, -1):
            acc = out[i]
            hi = i + bw if i + bw < n else n - 1
            for k in range(i + 1, hi + 1):
                acc = acc - lb[k - i, i] * out[k]
            out[i] = acc / lb[0, i]

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the streaming SGD engine.

Layouts are arrival-major so that both inner loops are contiguous axpy
updates: ``phit`` is (D, cap) with column i holding the features of X_i,
``coef`` is (cap, R) with row i holding the coefficients appended at arrival i
by each of the R trajectories.
"""
from libc.stdlib cimport calloc, free

BACKEND = "compiled"


def advance(const double[:, ::1] phit, const double[::1] mu, double[:, ::1] coef,
            const double[::1] y, const double[::1] gammas, const double[:, ::1] mult,
            Py_ssize_t start, Py_ssize_t stop, Py_ssize_t c0=0, Py_ssize_t c1=-1):
    """Process arrivals ``start <= i < stop`` for trajectory columns ``c0 <= r < c1``.

    ``mult[i - start, r]`` is the multiplier of trajectory r at arrival i. Each
    trajectory's prediction is summed sequentially over past arrivals, so the
    result for a column does not depend on which other columns are present.
    """
    cdef Py_ssize_t D = phit.shape[0]
    cdef Py_ssize_t R = coef.shape[1]
    cdef Py_ssize_t i, j, r, d
    cdef double g, yi, vd, kj
    cdef double *krow
    cdef double *acc
    if c1 < 0:
        c1 = R
    if not 0 <= c0 <= c1 <= R:
        raise ValueError("bad column range")
    if stop > phit.shape[1] or stop > coef.shape[0] or mult.shape[0] < stop - start:
        raise ValueError("arrival range exceeds storage")
    if mult.shape[1] != R:
        raise ValueError("multiplier columns do not match trajectories")
    if mu.shape[0] != D:
        raise ValueError("eigenvalue vector does not match feature rows")
    krow = <double *> calloc(stop if stop > 0 else 1, sizeof(double))
    acc = <double *> calloc(R if R > 0 else 1, sizeof(double))
    if krow == NULL or acc == NULL:
        free(krow)
        free(acc)
        raise MemoryError()
    try:
        with nogil:
            for i in range(start, stop):
                for j in range(i):
                    krow[j] = 0.0
                for d in range(D):
                    vd = mu[d] * phit[d, i]
                    for j in range(i):
                        krow[j] += phit[d, j] * vd
                for r in range(c0, c1):
                    acc[r] = 0.0
                for j in range(i):
                    kj = krow[j]
                    for r in range(c0, c1):
                        acc[r] += coef[j, r] * kj
                g = gammas[i]
                yi = y[i]
                for r in range(c0, c1):
                    coef[i, r] = g * mult[i - start, r] * (yi - acc[r])
    finally:
        free(krow)
        free(acc)

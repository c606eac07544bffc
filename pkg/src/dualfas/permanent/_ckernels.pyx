# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels mirroring ``_pykernels``; see that module for the maths."""
from libc.math cimport frexp, ldexp, log2, INFINITY
from libc.stdlib cimport malloc, free

import numpy as np


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil


def ryser(const double[:, ::1] a):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j
    cdef unsigned long long k, gray = 0, top
    cdef double term, total = 0.0, comp = 0.0, y, t
    cdef double *rowsum
    if n == 0:
        return 1.0
    rowsum = <double *> malloc(n * sizeof(double))
    for i in range(n):
        rowsum[i] = 0.0
    top = 1ULL << n
    try:
        for k in range(1, top):
            j = 0
            while not (k >> j) & 1:
                j += 1
            gray ^= 1ULL << j
            if (gray >> j) & 1:
                for i in range(n):
                    rowsum[i] += a[i, j]
            else:
                for i in range(n):
                    rowsum[i] -= a[i, j]
            term = 1.0
            for i in range(n):
                term *= rowsum[i]
            if __builtin_popcountll(gray) & 1:
                term = -term
            y = term - comp
            t = total + y
            comp = (t - total) - y
            total = t
    finally:
        free(rowsum)
    return -total if n & 1 else total


cdef inline void _forward(double *dp, const double *col, Py_ssize_t m, Py_ssize_t size) noexcept nogil:
    # descending S: dp[S - r] is still the pre-column value when dp[S] is updated
    cdef Py_ssize_t s, r
    cdef unsigned long long bits
    cdef double acc
    for s in range(size - 1, 0, -1):
        acc = 0.0
        bits = s
        while bits:
            r = __builtin_ctzll(bits)
            bits &= bits - 1
            acc += col[r] * dp[s ^ (1 << r)]
        dp[s] += acc


cdef inline void _backward(double *v, const double *col, Py_ssize_t m, Py_ssize_t size) noexcept nogil:
    # ascending S: v[S + r] is still the pre-column value when v[S] is updated
    cdef Py_ssize_t s, r
    cdef unsigned long long bits
    cdef double acc
    for s in range(size - 1):
        acc = 0.0
        bits = (size - 1) & ~s
        while bits:
            r = __builtin_ctzll(bits)
            bits &= bits - 1
            acc += col[r] * v[s | (1 << r)]
        v[s] += acc


cdef inline int _renorm(double *v, Py_ssize_t size) noexcept nogil:
    cdef double mx = 0.0
    cdef Py_ssize_t s
    cdef int e
    for s in range(size):
        if v[s] > mx:
            mx = v[s]
    if mx == 0.0 or mx == INFINITY:
        return 0
    frexp(mx, &e)
    for s in range(size):
        v[s] = ldexp(v[s], -e)
    return e


cdef double _kahan_sum(const double *v, Py_ssize_t size) noexcept nogil:
    cdef double total = 0.0, comp = 0.0, y, t
    cdef Py_ssize_t s
    for s in range(size):
        y = v[s] - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def extperm_scaled(const double[:, ::1] a):
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], size = 1 << a.shape[0]
    cdef Py_ssize_t j, r
    cdef long ex = 0
    cdef double total
    cdef double[::1] dp = np.zeros(size)
    cdef double[::1] col = np.empty(m)
    dp[0] = 1.0
    with nogil:
        for j in range(n):
            for r in range(m):
                col[r] = a[r, j]
            _forward(&dp[0], &col[0], m, size)
            ex += _renorm(&dp[0], size)
        total = _kahan_sum(&dp[0], size)
    return total, ex


def extperm_colderiv(const double[:, ::1] c, const double[::1] lam):
    cdef Py_ssize_t m = c.shape[0], n = c.shape[1], size = 1 << c.shape[0]
    cdef Py_ssize_t j, r, s
    cdef double[:, ::1] fwd = np.zeros((n + 1, size))
    cdef long[::1] fexp = np.zeros(n + 1, dtype=np.int_)
    cdef double[::1] adj = np.ones(size)
    cdef double[::1] col = np.empty(m)
    cdef double[::1] out = np.empty(n)
    cdef double g, acc, fsum
    cdef unsigned long long bits
    cdef long aexp = 0
    fwd[0, 0] = 1.0
    with nogil:
        for j in range(n):
            for s in range(size):
                fwd[j + 1, s] = fwd[j, s]
            for r in range(m):
                col[r] = c[r, j] * lam[j]
            _forward(&fwd[j + 1, 0], &col[0], m, size)
            fexp[j + 1] = fexp[j] + _renorm(&fwd[j + 1, 0], size)
        fsum = _kahan_sum(&fwd[n, 0], size)
        for j in range(n - 1, -1, -1):
            g = 0.0
            for s in range(1, size):
                acc = 0.0
                bits = s
                while bits:
                    r = __builtin_ctzll(bits)
                    bits &= bits - 1
                    acc += c[r, j] * fwd[j, s ^ (1 << r)]
                g += adj[s] * acc
            if g > 0.0:
                out[j] = log2(g) + aexp + fexp[j]
            else:
                out[j] = -INFINITY
            for r in range(m):
                col[r] = c[r, j] * lam[j]
            _backward(&adj[0], &col[0], m, size)
            aexp += _renorm(&adj[0], size)
    return log2(fsum) + fexp[n], np.asarray(out)

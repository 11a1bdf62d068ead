# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
from libc.math cimport floor, fabs, INFINITY

import numpy as np

NAME = "cython"


def oracle_scan(f, double h, lambdas):
    cdef double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lambdas, dtype=np.float64)
    cdef Py_ssize_t n = fv.shape[0]
    cdef Py_ssize_t nl = lv.shape[0]
    cdef long[::1] ms = np.empty(max(nl, 1), dtype=np.int64)
    cdef Py_ssize_t d, i, k, j, cnt
    cdef long m
    cdef bint dup
    cdef double h2 = h * h
    cdef double best = INFINITY
    cdef double a, b, c, mx, r, den
    cdef Py_ssize_t bd = -1, bm = -1, bi = -1
    cdef long long count = 0
    for d in range(2, n):
        cnt = 0
        for k in range(nl):
            m = <long>floor((1.0 - lv[k]) * d + 0.5)
            if m < 1:
                m = 1
            if m > d - 1:
                m = d - 1
            dup = False
            for j in range(cnt):
                if ms[j] == m:
                    dup = True
                    break
            if not dup:
                ms[cnt] = m
                cnt += 1
        for k in range(cnt):
            m = ms[k]
            den = (<double>m * (<double>d - <double>m)) * h2
            for i in range(n - d):
                count += 1
                a = fv[i]
                b = fv[i + d]
                mx = a if a > b else b
                if mx == INFINITY:
                    continue
                c = fv[i + m]
                r = 2.0 * (mx - c) / den
                if r < best:
                    best = r
                    bd = d
                    bm = m
                    bi = i
    return best, bd, bm, bi, count


def first_violation(fx, fy, fz, lam, d2, double sigma, double rtol):
    cdef double[::1] x = np.ascontiguousarray(fx, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(fy, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(fz, dtype=np.float64)
    cdef double[::1] lm = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] dd = np.ascontiguousarray(d2, dtype=np.float64)
    cdef Py_ssize_t k, n = x.shape[0]
    cdef double mx, q, rhs, tau
    cdef double half_sigma = 0.5 * sigma
    for k in range(n):
        mx = x[k] if x[k] > y[k] else y[k]
        if mx == INFINITY:
            continue
        q = lm[k] * (1.0 - lm[k]) * dd[k]
        rhs = mx - half_sigma * q
        tau = rtol * (1.0 + fabs(mx))
        if z[k] > rhs + tau:
            return k
    return -1


def min_ratio(fx, fy, fz, lam, d2, double guard):
    cdef double[::1] x = np.ascontiguousarray(fx, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(fy, dtype=np.float64)
    cdef double[::1] z = np.ascontiguousarray(fz, dtype=np.float64)
    cdef double[::1] lm = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[::1] dd = np.ascontiguousarray(d2, dtype=np.float64)
    cdef Py_ssize_t k, n = x.shape[0]
    cdef Py_ssize_t bk = -1
    cdef long long used = 0
    cdef double mx, den, r
    cdef double best = INFINITY
    for k in range(n):
        mx = x[k] if x[k] > y[k] else y[k]
        den = lm[k] * (1.0 - lm[k]) * dd[k]
        if den < guard or mx == INFINITY:
            continue
        used += 1
        r = 2.0 * (mx - z[k]) / den
        if bk < 0 or r < best:
            best = r
            bk = k
    if used == 0:
        return INFINITY, -1, 0
    return best, bk, used

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Callers validate shapes and overflow budgets."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

ctypedef fused num_t:
    cnp.int64_t
    double


def linear_sieve(Py_ssize_t n_max):
    """Smallest prime factor, its exponent, and the cofactor for every n.

    For n >= 2 with smallest prime p and p**k || n: spf[n] = p, exp[n] = k,
    rest[n] = n / p**k. Linear sieve, O(n_max).
    """
    cdef cnp.ndarray[cnp.int32_t] spf_a = np.zeros(n_max + 1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int8_t] exp_a = np.zeros(n_max + 1, dtype=np.int8)
    cdef cnp.ndarray[cnp.int32_t] rest_a = np.zeros(n_max + 1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t] primes_a = np.zeros(n_max // 2 + 16, dtype=np.int32)
    cdef cnp.int32_t[::1] spf = spf_a
    cdef cnp.int8_t[::1] ex = exp_a
    cdef cnp.int32_t[::1] rest = rest_a
    cdef cnp.int32_t[::1] primes = primes_a
    cdef Py_ssize_t i, j, np_ = 0, m
    cdef cnp.int32_t p
    if n_max >= 1:
        spf[1] = 1
        rest[1] = 1
    for i in range(2, n_max + 1):
        if spf[i] == 0:
            spf[i] = <cnp.int32_t>i
            primes[np_] = <cnp.int32_t>i
            np_ += 1
        for j in range(np_):
            p = primes[j]
            if p > spf[i] or i * p > n_max:
                break
            spf[i * p] = p
        p = spf[i]
        m = i // p
        if m > 1 and spf[m] == p:
            ex[i] = ex[m] + 1
            rest[i] = rest[m]
        else:
            ex[i] = 1
            rest[i] = <cnp.int32_t>m
    return spf_a, exp_a, rest_a


def combine(num_t[::1] out, const cnp.int32_t[::1] rest, const num_t[::1] v, bint additive):
    """out[n] = out[rest[n]] (op) v[n] for n = 2..N, in increasing n."""
    cdef Py_ssize_t n, N = out.shape[0] - 1
    if additive:
        for n in range(2, N + 1):
            out[n] = out[rest[n]] + v[n]
    else:
        for n in range(2, N + 1):
            out[n] = out[rest[n]] * v[n]


def dirichlet_convolve(const num_t[::1] f, const num_t[::1] g, num_t[::1] out):
    """out[n] += sum over d*e = n of f[d] g[e]."""
    cdef Py_ssize_t d, e, N = f.shape[0] - 1, lim
    cdef num_t fd
    for d in range(1, N + 1):
        fd = f[d]
        if fd == 0:
            continue
        lim = N // d
        for e in range(1, lim + 1):
            out[d * e] += fd * g[e]


cdef inline cnp.int64_t _gcd(cnp.int64_t a, cnp.int64_t b) nogil:
    cdef cnp.int64_t t
    while b:
        t = a % b
        a = b
        b = t
    return a


def pair_sum_int(const cnp.int64_t[::1] f, cnp.int64_t x, int side):
    """Sum of f(gcd) (side 0) or f(lcm) (side 1) over the region m*n <= x."""
    cdef cnp.int64_t m, n, g, lim, acc = 0
    for m in range(1, x + 1):
        lim = x // m
        for n in range(1, lim + 1):
            g = _gcd(m, n)
            if side == 0:
                acc += f[g]
            else:
                acc += f[(m // g) * n]
    return acc


def pair_sum_float(const double[::1] f, cnp.int64_t x, int side):
    """Float variant of pair_sum_int with Neumaier-compensated accumulation."""
    cdef cnp.int64_t m, n, g, lim
    cdef double s = 0.0, c = 0.0, t, y
    for m in range(1, x + 1):
        lim = x // m
        for n in range(1, lim + 1):
            g = _gcd(m, n)
            if side == 0:
                y = f[g]
            else:
                y = f[(m // g) * n]
            t = s + y
            if fabs(s) >= fabs(y):
                c += (s - t) + y
            else:
                c += (y - t) + s
            s = t
    return s + c


def neumaier_cumsum(const double[::1] v):
    """Prefix sums with Neumaier compensation."""
    cdef Py_ssize_t i, N = v.shape[0]
    cdef cnp.ndarray[double] out_a = np.zeros(N, dtype=np.float64)
    cdef double[::1] out = out_a
    cdef double s = 0.0, c = 0.0, t, y
    for i in range(N):
        y = v[i]
        t = s + y
        if fabs(s) >= fabs(y):
            c += (s - t) + y
        else:
            c += (y - t) + s
        s = t
        out[i] = s + c
    return out_a

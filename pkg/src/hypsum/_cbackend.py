"""Compiled backend: thin wrappers giving _ckernels the numpy backend's API."""

import numpy as np

from . import _ckernels
from ._pybackend import small_primes  # noqa: F401  (shared, not a hot path)

NAME = "cython"

_decomp = {"n": -1, "arrays": None}


def _decompose(n_max):
    if _decomp["n"] < n_max:
        _decomp["arrays"] = _ckernels.linear_sieve(n_max)
        _decomp["n"] = n_max
    spf, ex, rest = _decomp["arrays"]
    return spf[: n_max + 1], ex[: n_max + 1], rest[: n_max + 1]


def release():
    """Drop the cached linear-sieve arrays."""
    _decomp["n"] = -1
    _decomp["arrays"] = None


def spf_table(n_max):
    spf, _, _ = _decompose(n_max)
    return spf.astype(np.int64)


def prime_power_table(n_max, ppfunc, dtype, additive=False, segment=None):
    out = np.zeros(n_max + 1, dtype=dtype)
    if n_max < 1:
        return out
    out[1] = 0 if additive else 1
    if n_max < 2:
        return out
    spf, ex, rest = _decompose(n_max)
    v = np.zeros(n_max + 1, dtype=dtype)
    v[2:] = ppfunc(spf[2:].astype(np.int64), ex[2:].astype(np.int64))
    _ckernels.combine(out, np.ascontiguousarray(rest), v, bool(additive))
    return out


def dirichlet_convolve(f, g):
    dtype = np.result_type(f.dtype, g.dtype)
    f = np.ascontiguousarray(f, dtype=dtype)
    g = np.ascontiguousarray(g, dtype=dtype)
    out = np.zeros(len(f), dtype=dtype)
    _ckernels.dirichlet_convolve(f, g, out)
    return out


def pair_sum(f, x, side):
    if f.dtype.kind == "f":
        return float(_ckernels.pair_sum_float(np.ascontiguousarray(f, dtype=np.float64), x, side))
    return int(_ckernels.pair_sum_int(np.ascontiguousarray(f, dtype=np.int64), x, side))


def compensated_cumsum(values):
    return _ckernels.neumaier_cumsum(np.ascontiguousarray(values, dtype=np.float64))

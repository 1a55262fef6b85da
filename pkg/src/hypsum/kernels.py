"""Backend selection for the hot kernels.

The compiled extension is preferred; the numpy implementation is used when
it is missing or when the environment variable ``HYPSUM_PURE`` is set to a
non-empty value other than ``0``. Both expose the same functions::

    spf_table, prime_power_table, dirichlet_convolve, pair_sum,
    compensated_cumsum, small_primes
"""

import importlib
import os

from . import _pybackend


def _load_compiled():
    if os.environ.get("HYPSUM_PURE", "") not in ("", "0"):
        return None
    try:
        return importlib.import_module("hypsum._cbackend")
    except ImportError:
        return None


_compiled = _load_compiled()
active = _compiled if _compiled is not None else _pybackend
BACKEND = active.NAME


def available_backends():
    names = ["python"]
    try:
        importlib.import_module("hypsum._cbackend")
        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return a backend module by name ('python' or 'cython')."""
    if name == "python":
        return _pybackend
    if name == "cython":
        return importlib.import_module("hypsum._cbackend")
    raise ValueError(f"unknown backend {name!r}")


def spf_table(n_max):
    return active.spf_table(n_max)


def prime_power_table(n_max, ppfunc, dtype, additive=False, segment=None):
    if segment is not None:
        # the segmented path is numpy-only: it never holds an spf array
        return _pybackend.prime_power_table(n_max, ppfunc, dtype, additive, segment)
    return active.prime_power_table(n_max, ppfunc, dtype, additive)


def dirichlet_convolve(f, g):
    return active.dirichlet_convolve(f, g)


def pair_sum(f, x, side):
    return active.pair_sum(f, x, side)


def compensated_cumsum(values):
    return active.compensated_cumsum(values)


def small_primes(limit):
    return _pybackend.small_primes(limit)

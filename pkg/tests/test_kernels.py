import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypsum import kernels

BACKENDS = kernels.available_backends()
py = kernels.get_backend("python")

needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled backend not built")


def test_python_backend_always_available():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("name", BACKENDS)
def test_spf(name):
    spf = kernels.get_backend(name).spf_table(1000)
    for n in range(2, 1001):
        p = int(spf[n])
        assert n % p == 0 and all(n % q for q in range(2, p))


@pytest.mark.parametrize("name", BACKENDS)
def test_pair_sum_small(name):
    b = kernels.get_backend(name)
    f = np.arange(5, dtype=np.int64)
    # pairs (m, n) with mn <= 4 and their gcds / lcms
    assert b.pair_sum(f, 4, 0) == 9
    assert b.pair_sum(f, 4, 1) == 21


@needs_compiled
@given(st.integers(1, 3000), st.sampled_from(["tau", "mu", "phi", "omega"]))
def test_prime_power_tables_agree(n, name):
    c = kernels.get_backend("cython")
    funcs = {
        "tau": (lambda p, k: k + 1, False),
        "mu": (lambda p, k: np.where(k == 1, -1, 0), False),
        "phi": (lambda p, k: p**k - p ** (k - 1), False),
        "omega": (lambda p, k: np.ones_like(k), True),
    }
    fn, add = funcs[name]
    a = py.prime_power_table(n, fn, np.int64, add)
    b = c.prime_power_table(n, fn, np.int64, add)
    assert np.array_equal(a[1:], b[1:])


@needs_compiled
@given(st.lists(st.integers(-9, 9), min_size=2, max_size=300), st.integers(0, 2**32))
def test_dirichlet_convolve_agrees(vals, seed):
    c = kernels.get_backend("cython")
    f = np.array(vals, dtype=np.int64)
    f[0] = 0
    g = np.random.default_rng(seed).integers(-9, 10, len(f)).astype(np.int64)
    g[0] = 0
    assert np.array_equal(py.dirichlet_convolve(f, g)[1:], c.dirichlet_convolve(f, g)[1:])


@needs_compiled
@given(st.integers(1, 4000), st.sampled_from([0, 1]), st.booleans())
def test_pair_sum_agrees(x, side, floating):
    c = kernels.get_backend("cython")
    f = np.arange(x + 1, dtype=np.int64) % 7 - 3
    if floating:
        f = np.sqrt(np.arange(x + 1, dtype=np.float64))
        a, b = py.pair_sum(f, x, side), c.pair_sum(f, x, side)
        assert a == pytest.approx(b, rel=1e-13)
    else:
        assert py.pair_sum(f, x, side) == c.pair_sum(f, x, side)


@needs_compiled
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=500))
def test_cumsum_agrees(vals):
    c = kernels.get_backend("cython")
    v = np.array(vals)
    a, b = py.compensated_cumsum(v), c.compensated_cumsum(v)
    scale = np.cumsum(np.abs(v)) + 1.0
    assert np.all(np.abs(a - b) <= 1e-12 * scale)


@pytest.mark.parametrize("name", BACKENDS)
def test_cumsum_is_compensated(name):
    v = np.array([1.0, 1e-16] * 50000)
    out = kernels.get_backend(name).compensated_cumsum(v)
    assert out[-1] == pytest.approx(50000 + 5e-12, abs=1e-11)
    assert math.isclose(out[-1], math.fsum(v), rel_tol=1e-15)


def test_small_primes():
    assert kernels.small_primes(30).tolist() == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]

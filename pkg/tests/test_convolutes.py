import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypsum import convolutes as cv
from hypsum import oracle, sieve
from hypsum.errors import UsageError
from hypsum.sieve import FunctionSpec

from strategies import STANDARD_SPECS, function_specs

N = 5000


@pytest.mark.parametrize("spec", STANDARD_SPECS, ids=str)
def test_gcd_identities_match_oracle(spec):
    ref = oracle.convolute_table("gcd", spec, N)
    for method in cv.GCD_METHODS:
        got = cv.convolute(spec, N, "gcd", method).values
        assert cv.agree(got[1:], ref[1:]), method


@pytest.mark.parametrize("spec", STANDARD_SPECS, ids=str)
def test_lcm_identities_match_oracle(spec):
    ref = oracle.convolute_table("lcm", spec, N)
    for method in ("brute", "Lf1", "Lf2"):
        got = cv.convolute(spec, N, "lcm", method).values
        assert cv.agree(got[1:], ref[1:]), method


@given(function_specs())
def test_identities_agree_for_any_spec(spec):
    n = 600
    g = [cv.convolute(spec, n, "gcd", m).values for m in cv.GCD_METHODS]
    l_ = [cv.convolute(spec, n, "lcm", m).values for m in ("brute", "Lf1", "Lf2")]
    assert all(cv.agree(g[0][1:], v[1:]) for v in g[1:])
    assert all(cv.agree(l_[0][1:], v[1:]) for v in l_[1:])


@pytest.mark.parametrize(
    "spec", [FunctionSpec.omega(), FunctionSpec.log_kappa(), FunctionSpec.big_omega(), FunctionSpec.log()], ids=str
)
def test_additive_relation(spec):
    a = cv.lf_via_additive_relation(spec, N).values
    b = cv.lf_table_identity(spec, N, "Lf2").values
    assert cv.agree(a[1:], b[1:])


@given(function_specs())
def test_additive_relation_any_additive_spec(spec):
    if spec.additivity == sieve.NONE:
        with pytest.raises(UsageError):
            cv.lf_via_additive_relation(spec, 50)
        return
    a = cv.lf_via_additive_relation(spec, 500).values
    b = cv.brute_table(spec, 500, "lcm").values
    assert cv.agree(a[1:], b[1:])


def test_psi_tau_squared():
    a = cv.lf_tau_via_psi(N).values
    b = oracle.convolute_table("lcm", FunctionSpec.tau(), N)
    assert np.array_equal(a[1:], b[1:])
    with pytest.raises(UsageError):
        cv.convolute(FunctionSpec.id(), 10, "lcm", "psi_tau2")


def test_gcd_from_values_is_2omega_pairing():
    f = sieve.build_f_table(FunctionSpec.id(), 100).values
    tw = sieve.sieve_standard("two_pow_omega", 100).values
    g = cv.gf_from_values(f, tw)
    assert g[12] == sum(math.gcd(d, 12 // d) for d in oracle.divisors(12))


@given(st.integers(1, 3000), st.sampled_from(STANDARD_SPECS))
def test_single_value_routes(n, spec):
    assert cv.gf_brute(spec, n) == pytest.approx(oracle.brute_convolute("gcd", spec, n).value, rel=1e-13)
    assert cv.lf_brute(spec, n) == pytest.approx(oracle.brute_convolute("lcm", spec, n).value, rel=1e-13)


def test_agree_semantics():
    a = np.array([1, 2, 3])
    assert cv.agree(a, a.copy()) and not cv.agree(a, a + np.array([0, 0, 1]))
    x = np.array([1.0, 2.0])
    assert cv.agree(x, x * (1 + 1e-14)) and not cv.agree(x, x * (1 + 1e-10))


def test_bad_arguments():
    with pytest.raises(UsageError):
        cv.convolute(FunctionSpec.id(), 10, "both", "Gf1")
    with pytest.raises(UsageError):
        cv.gf_table_identity(FunctionSpec.id(), 10, "Gf9")
    with pytest.raises(UsageError):
        cv.lf_table_identity(FunctionSpec.id(), 0, "Lf1")


SERIES_CASES = [
    (FunctionSpec.tau(), 3.0),
    (FunctionSpec.id(), 2.5),
    (FunctionSpec.omega(), 1.5),
    (FunctionSpec.power_log(0.5, 1.0), 2.0),
    (FunctionSpec.id(), 1.2),
    (FunctionSpec.log(), 1.1),
    (FunctionSpec.s_eta("1,3,from:5", 2.0), 1.3),
]


@pytest.mark.parametrize("spec,z", SERIES_CASES, ids=lambda v: str(v))
def test_dirichlet_series_identity(spec, z):
    lhs, rhs = cv.dirichlet_series_check(spec, z, n_terms=20000)
    assert lhs.agrees(rhs)
    if z >= 2:
        # far from the pole the tail allowance is small
        assert lhs.error_bound < 0.05 * abs(lhs.value)


def test_dirichlet_series_domain_and_zero_table():
    with pytest.raises(UsageError):
        cv.dirichlet_series_check(FunctionSpec.id(), 1.0)
    with pytest.raises(UsageError):
        cv.dirichlet_series_check(FunctionSpec.tau(), 3.0, n_terms=10)
    zero = sieve.from_array("zero", np.zeros(11, dtype=np.int64))
    lhs, rhs = cv.dirichlet_series_check(zero, 2.0, n_terms=100)
    assert lhs.value == rhs.value == 0.0
    with pytest.raises(UsageError):
        cv.dirichlet_series_check(sieve.sieve_standard("tau", 100), 2.0, n_terms=100)

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypsum import constants as c
from hypsum import oracle
from hypsum.constants import ConstantEstimate
from hypsum.errors import PoleError, UsageError
from hypsum.formulas import FormulaId
from hypsum.sieve import FunctionSpec, SetS

from strategies import sets_s

mpmath.mp.dps = 30


@pytest.mark.parametrize("s", [0.5, 1.5, 2.0, 2.5, 3.0, 4.0, 7.5, 12.0, 20.0])
@pytest.mark.parametrize("j", [0, 1, 2, 3])
def test_zeta_and_derivatives_against_mpmath(s, j):
    est = c.zeta_derivative(s, j)
    ref = float(mpmath.zeta(s, derivative=j))
    assert est.contains(ref) or abs(est.value - ref) <= 4 * c.EPS * abs(ref)
    # below the pole the head sum cancels heavily, so only s > 1 gets the tight bound
    tol = 1e-12 if s > 1 else 1e-10
    assert est.error_bound <= tol * max(1.0, abs(ref))


def test_zeta_domain():
    with pytest.raises(PoleError):
        c.zeta(1.0)
    with pytest.raises(UsageError):
        c.zeta(-1.0)
    with pytest.raises(UsageError):
        c.zeta(0.5, "first_derivative")
    with pytest.raises(UsageError):
        c.zeta(2.0, "fourth")


@pytest.mark.parametrize("j", [0, 1, 2])
def test_stieltjes(j):
    est = c.stieltjes(j)
    assert est.contains(float(mpmath.stieltjes(j))) or abs(est.value - float(mpmath.stieltjes(j))) < 1e-14
    assert abs(c.stieltjes(0).value - c.GAMMA_LITERAL) < 1e-14


@pytest.mark.parametrize("s", [2.0, 3.0, 4.5])
@pytest.mark.parametrize("j", [0, 1, 2])
def test_prime_zeta(s, j):
    est = c.prime_zeta(s, j)
    ref = float(mpmath.diff(mpmath.primezeta, s, j)) if j else float(mpmath.primezeta(s))
    assert abs(est.value - ref) <= est.error_bound + 1e-13 * abs(ref)


def test_prime_sums_against_mpmath():
    P = mpmath.primezeta
    assert c.prime_sum_accelerated("inv_p2").contains(float(P(2))) or abs(
        c.prime_sum_accelerated("inv_p2").value - float(P(2))
    ) < 1e-14
    # sum 1/(p^2-1) = sum_k P(2k)
    ref = float(mpmath.nsum(lambda k: P(2 * k), [1, mpmath.inf]))
    assert abs(c.prime_sum_accelerated("inv_p2m1").value - ref) < 1e-13
    # C_log = -zeta'(2)/zeta(2) = sum log p / (p^2 - 1)
    ref = float(-mpmath.zeta(2, derivative=1) / mpmath.zeta(2))
    assert abs(c.named_constant("C_log").value - ref) < 1e-13


@pytest.mark.parametrize("name", list(c.WEIGHT_NAMES))
def test_direct_and_accelerated_prime_sums_agree(name):
    a = c.prime_sum_accelerated(name)
    d = c.prime_sum(name, 10**6)
    assert a.agrees(d)
    assert a.error_bound < 1e-11
    assert d.error_bound < 1e-4


@pytest.mark.parametrize("name,printed", sorted(c.PUBLISHED_DECIMALS.items()))
def test_printed_decimals(name, printed):
    est = c.named_constant(name)
    assert abs(est.value - printed) <= 1e-6
    assert est.error_bound < 1e-10


@pytest.mark.parametrize("name", ["C_log", "C_omega", "C_Omega", "C_logkappa", "M", "K_omega", "K_Omega", "C1_tau_lcm"])
def test_cross_method(name):
    a = c.named_constant(name)
    d = c.direct_counterpart(name, 10**7)
    assert a.agrees(d)


def test_d_log_display_matches_series_route():
    a = c.named_constant("D_log")
    d = c.direct_counterpart("D_log", 10**7)
    assert a.agrees(d)
    # and the f_(S,eta) route with S = N, eta = 1
    _, D = c.seta_constants(SetS.natural(), 1.0)
    assert a.agrees(D)


def test_mertens_constant():
    # M = gamma + sum_p (log(1 - 1/p) + 1/p)
    assert abs(c.named_constant("M").value - 0.2614972128476427837554268386) < 1e-13


def test_c1_tau_lcm_against_partial_product():
    # (1/pi^2) prod_p (1 - 1/(p+1)^2); the primes beyond 1e5 move the product by < 1e-6
    mask = oracle._is_prime_mask(10**5)
    ps = np.flatnonzero(mask).astype(np.float64)
    partial = math.exp(math.fsum(np.log1p(-1.0 / (ps + 1.0) ** 2))) / math.pi**2
    est = c.named_constant("C1_tau_lcm")
    assert est.value < partial < est.value * (1 + 1e-5)


@pytest.mark.parametrize("p", [2, 3, 5, 7, 101])
@given(sets_s())
def test_hs_ks_sandwich(p, S):
    H, K = c.hs_ks(p, S)
    # 1/p^2 <= H_S <= 1/(p^2-1) and 1/p^2 <= K_S <= p^2/(p^2-1)^2
    assert 1 / p**2 <= H <= 1 / (p * p - 1) * (1 + 1e-15)
    assert 1 / p**2 <= K <= p * p / (p * p - 1) ** 2 * (1 + 1e-15)
    assert H <= K


def test_hs_ks_closed_forms():
    assert c.hs_ks(2, "all")[0] == pytest.approx(1 / 3, rel=1e-15)
    assert c.hs_ks(2, "1") == (0.25, 0.25)
    H, K = c.hs_ks(3, "1,from:3")
    q = 1 / 9
    assert H == pytest.approx(q + q**3 / (1 - q), rel=1e-15)
    assert K == pytest.approx(q + sum(v * q**v for v in range(3, 80)), rel=1e-14)


def test_seta_routes_agree():
    for S, eta in (("1", 0.0), ("all", 1.0), ("1,3,from:5", 2.0), ("1,2", 1.0)):
        a = c.seta_constants(S, eta, "accelerated")
        d = c.seta_constants(S, eta, "direct", p_max=10**6)
        assert a[0].agrees(d[0]) and a[1].agrees(d[1])
    # fractional eta has only the direct route
    with pytest.raises(UsageError):
        c.seta_constants("1,2", 0.5, "accelerated")
    C, D = c.seta_constants("1,2", 0.5, "direct", p_max=10**6)
    assert C.error_bound < 1e-4 and math.isfinite(D.value)


@pytest.mark.parametrize(
    "spec",
    [FunctionSpec.omega(), FunctionSpec.big_omega(), FunctionSpec.log(), FunctionSpec.log_kappa()],
    ids=str,
)
def test_generic_and_seta_routes_agree(spec):
    g = c.generic_constants(spec, 10**6)
    s = c.formula_constants(FormulaId.FSETA_GCD, spec)
    assert g[0].agrees(s["x_log"]) and g[1].agrees(s["x"])


def test_formula_constants_cover_every_formula():
    for F in FormulaId:
        spec = FunctionSpec.omega() if F.needs_spec else None
        rows = c.coefficient_estimates(F, spec)
        assert rows and all(r.name.startswith(F.value + ".") for r in rows)
        for r in rows:
            assert r.fit_only or (math.isfinite(r.value) and r.error_bound >= 0)


def test_derived_gcd_id_coefficients():
    d = c.derived_counterparts(FormulaId.HYP_GCD_ID)
    z2 = mpmath.zeta(2)
    zp = mpmath.zeta(2, derivative=1)
    g = mpmath.euler
    ref_c1 = float((2 * g - mpmath.mpf(1) / 2 - zp / z2) / z2)
    assert abs(d["c1"].value - ref_c1) <= d["c1"].error_bound + 1e-15
    assert d["c2"].error_bound < 1e-11
    assert c.derived_counterparts(FormulaId.TAU_GCD) == {}


def test_interval_arithmetic_contains_truth():
    a = ConstantEstimate("a", 1.0, 1e-3)
    b = ConstantEstimate("b", 2.0, 1e-3)
    for fn, true in (
        (lambda x, y: x + y, 3.0),
        (lambda x, y: x * y, 2.0),
        (lambda x, y: x / y, 0.5),
        (lambda x, y: x - y, -1.0),
    ):
        assert fn(a, b).contains(true)
    assert (a**3).value == 1.0 and a.exp().contains(math.e) and b.log().contains(math.log(2))
    with pytest.raises(UsageError):
        a / ConstantEstimate("z", 0.0, 1.0)
    with pytest.raises(UsageError):
        ConstantEstimate("bad", 1.0, 0.0, "guess")


@given(
    st.floats(-10, 10), st.floats(0, 1e-3), st.floats(-10, 10), st.floats(0, 1e-3), st.floats(-1, 1), st.floats(-1, 1)
)
def test_interval_propagation_property(va, ea, vb, eb, ta, tb):
    # any point inside both input intervals maps inside the output interval
    a = ConstantEstimate("a", va, ea)
    b = ConstantEstimate("b", vb, eb)
    xa, xb = va + ta * ea, vb + tb * eb
    assert (a + b).contains(xa + xb) or abs((a + b).value - (xa + xb)) < 1e-12
    prod = a * b
    assert abs(prod.value - xa * xb) <= prod.error_bound * (1 + 1e-12) + 1e-12


def test_partial_summation_tail_is_an_upper_bound():
    # sum_{n > x} 1/n^3 with U(t) = t
    x = 1000.0
    bound = c.partial_summation_tail(lambda t: t, 0, 3.0, x)
    true = float(mpmath.zeta(3, 1001))
    # the integral of t * 3 t^-4 over [x, inf) is 3 / (2 x^2), about three times the truth
    assert true <= bound <= 1.5 / x**2 * (1 + 1e-5)


def test_fit_placeholder_and_rows():
    p = ConstantEstimate.fit_placeholder("c1")
    assert p.fit_only and math.isnan(p.value)
    assert p.as_row()["value"] == "fit"
    assert ConstantEstimate.exact(3.0).as_row()["error_bound"] == "0.000e+00"

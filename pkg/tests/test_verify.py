import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypsum import verify as vf
from hypsum.errors import ConditioningError, DomainError, StateError, UsageError
from hypsum.formulas import FormulaId
from hypsum.sieve import FunctionSpec

from strategies import function_specs


def test_lambda_values_and_domain():
    x = 1e6
    L = math.log(x)
    assert vf.lam(x) == pytest.approx(math.exp(-0.2 * L**0.6 / math.log(L) ** 0.2), rel=1e-15)
    assert 0 < vf.lam(1e7) < vf.lam(1e3) < 1
    with pytest.raises(DomainError):
        vf.lam(2.0)
    with pytest.raises(UsageError):
        vf.lam(10.0, c=0.0)


def test_envelope_parse_and_eval():
    e = vf.Envelope.parse("x^0.5*log^2*lambda")
    assert e == vf.Envelope(0.5, 2.0, 0.0, True)
    assert vf.Envelope.parse(str(e)) == e
    assert vf.Envelope.parse("sqrt") is vf.NAMED_ENVELOPES["sqrt"]
    assert vf.envelope_eval("1", 5.0) == 1.0
    assert vf.envelope_eval("x^1*loglog^1", 100.0) == pytest.approx(100 * math.log(math.log(100)))
    with pytest.raises(UsageError):
        vf.Envelope.parse("y^2")
    with pytest.raises(DomainError):
        vf.envelope_eval("sqrt_loglog", 2.0)
    with pytest.raises(DomainError):
        vf.envelope_eval("log2", 1.0)


@given(st.floats(0, 2), st.floats(-1, 3), st.floats(3.5, 1e9))
def test_envelope_is_product_of_factors(p, q, x):
    e = vf.Envelope(p, q)
    assert e(x) == pytest.approx(x**p * math.log(x) ** q, rel=1e-12)


def test_generic_envelope_three_branch_rule():
    # beta < 0 -> sqrt(x) lambda(x)
    assert vf.envelope_for(FormulaId.GENERIC_GCD, FunctionSpec.power_log(-0.5, 0.0)) == vf.Envelope(0.5, with_lambda=True)
    # beta = 0, delta = -1 -> sqrt(x) loglog x
    assert vf.envelope_for(FormulaId.GENERIC_GCD, FunctionSpec.power_log(0.0, -1.0)) == vf.Envelope(0.5, loglog_power=1.0)
    # otherwise x^((beta+1)/2) (log x)^(delta+1)
    assert vf.envelope_for(FormulaId.GENERIC_GCD, FunctionSpec.power_log(0.5, 1.0)) == vf.Envelope(0.75, 2.0)
    # the f_(S,eta) family uses sqrt(x) (log x)^eta
    assert vf.envelope_for(FormulaId.FSETA_GCD, FunctionSpec.s_eta("1,2", 2.0)) == vf.Envelope(0.5, 2.0)
    with pytest.raises(UsageError):
        vf.envelope_for(FormulaId.GENERIC_GCD, FunctionSpec.id())
    with pytest.raises(UsageError):
        vf.envelope_for(FormulaId.GENERIC_GCD)


@given(function_specs())
def test_every_growth_spec_gets_an_envelope(spec):
    beta, _ = spec.growth
    if beta >= 1:
        with pytest.raises(UsageError):
            vf.envelope_for(FormulaId.GENERIC_GCD, spec)
        return
    env = vf.envelope_for(FormulaId.GENERIC_GCD, spec)
    assert math.isfinite(env(1e5)) and env(1e5) > 0


def test_every_named_formula_has_envelope_and_claim():
    for F in FormulaId:
        spec = FunctionSpec.omega() if F.needs_spec else None
        assert isinstance(vf.envelope_for(F, spec), vf.Envelope)
        assert vf.claimed_error(F, spec)


def test_parse_grid():
    g = vf.parse_grid("1e3:1e7:12")
    assert len(g) == 12 and g[0] == pytest.approx(1e3) and g[-1] == pytest.approx(1e7)
    assert np.allclose(np.diff(np.log(g)), math.log(10) * 4 / 11)
    assert vf.parse_grid("300, 100,200") == [100.0, 200.0, 300.0]
    for bad in ("1:2", "5:1:4", "1:10:1", "", "0:10:3"):
        with pytest.raises(UsageError):
            vf.parse_grid(bad)


def test_check_grid():
    vf._check_grid([1e3, 1e4, 1e5, 1e6, 1e7])
    with pytest.raises(UsageError):
        vf._check_grid([1e3, 1e4, 1e5, 1e6])
    with pytest.raises(UsageError):
        vf._check_grid([1e3, 2e3, 3e3, 4e3, 5e3])
    with pytest.raises(UsageError):
        vf._check_grid([1e3, 1e4, 1e4, 1e6, 1e7])


def test_default_grids():
    assert vf.default_grid("rect_gcd")[0] == pytest.approx(1e2)
    assert vf.default_grid("tau_gcd")[-1] == pytest.approx(1e7)
    assert len(vf.default_grid("ratio_hyp")) == 12


def test_main_term_and_flags():
    mt = vf.main_term(FormulaId.RECT_RATIO, 5.0)
    assert mt.small_x
    assert not vf.main_term(FormulaId.RECT_RATIO, 100.0).small_x
    with pytest.raises(DomainError):
        vf.main_term(FormulaId.RECT_RATIO, 0.5)
    with pytest.raises(StateError):
        vf.main_term(FormulaId.HYP_GCD_ID, 100.0)
    with pytest.raises(DomainError):
        vf.main_term(FormulaId.OMEGA_LCM, 2.0)


def test_model_describe_and_coefficient():
    m = vf.build_model(FormulaId.HYP_GCD_ID)
    assert m.fit_keys == ["c1", "c2"] and m.missing == ["c1", "c2"]
    with pytest.raises(StateError):
        m.coefficient("c1")
    m.fitted.update(c1=0.7, c2=0.3)
    assert m.coefficient("c1").value == 0.7
    rows = m.describe()
    assert [r["method"] for r in rows].count("fit") == 2


GRID = [float(v) for v in np.geomspace(1e3, 1e6, 8)]


def test_residual_scan_report():
    rep = vf.residual_scan(FormulaId.OMEGA_GCD, GRID)
    assert len(rep.rows()) == len(GRID)
    for row in rep.rows():
        assert row["residual"] == pytest.approx(row["exact"] - row["main"], abs=1e-6 * abs(row["exact"]))
        assert row["normalized"] == pytest.approx(row["residual"] / row["envelope"])
    s = rep.summary()
    assert s["points"] == 8 and s["formula"] == "omega_gcd" and s["version"]
    assert rep.sup_normalized >= max(rep.sup_bottom, rep.sup_top) * (1 - 1e-15)
    assert rep.no_growth == (rep.growth_ratio <= vf.NO_GROWTH_FACTOR)
    data = json.loads(rep.to_json())
    assert data["metadata"]["grid"]["points"] == 8 and len(data["rows"]) == 8
    assert rep.to_csv().splitlines()[0] == "x,exact,main,main_bound,residual,envelope,normalized,version"
    assert rep.to_csv() == vf.residual_scan(FormulaId.OMEGA_GCD, GRID).to_csv()


def test_residual_scan_needs_fit():
    with pytest.raises(StateError):
        vf.residual_scan(FormulaId.HYP_GCD_ID, GRID)
    rep = vf.residual_scan(FormulaId.HYP_GCD_ID, GRID, fit=True)
    assert set(rep.fitted) == {"c1", "c2"}


def test_residual_scan_bad_grid():
    with pytest.raises(UsageError):
        vf.residual_scan(FormulaId.OMEGA_GCD, [1e3, 1e4])


def test_growth_exponent():
    xs = list(np.geomspace(10, 1e6, 9))
    assert vf.growth_exponent(grid=xs, residual=[x**0.5 for x in xs]) == pytest.approx(0.5)
    assert math.isnan(vf.growth_exponent(grid=xs, residual=[0.0] * 9))
    with pytest.raises(UsageError):
        vf.growth_exponent(grid=xs[:3], residual=[1.0, 2.0, 3.0])


def _synthetic(formula, grid, coefs, noise=0.0, seed=0):
    m = vf.build_model(formula)
    rng = np.random.default_rng(seed)
    out = []
    for x in grid:
        v = m.known_part(x)[0] + sum(c * vf.basis_value(k, x) for k, c in coefs.items())
        v += noise * vf.envelope_eval(m.envelope, x) * rng.standard_normal()
        out.append(v)
    return out


@pytest.mark.parametrize(
    "formula,coefs",
    [(FormulaId.HYP_GCD_ID, {"c1": 0.74, "c2": 0.35}), (FormulaId.TAU_LCM, {"C2": 0.5, "C3": -1.25, "C4": 2.0})],
)
def test_fit_recovers_synthetic_coefficients(formula, coefs):
    grid = vf.default_grid(formula)
    rep = vf.fit_parameters(formula, grid, exact=_synthetic(formula, grid, coefs))
    for k, v in coefs.items():
        assert rep.values[k] == pytest.approx(v, rel=1e-8)
    assert rep.stable and max(rep.stability.values()) < 1e-8
    assert rep.condition < vf.MAX_CONDITION


def test_fit_with_envelope_noise_is_flagged_unstable_only_when_noise_dominates():
    # the envelope here is 30-50 times x itself, so even a small fraction of it swamps c2
    grid = vf.default_grid(FormulaId.HYP_GCD_ID)
    quiet = vf.fit_parameters(
        FormulaId.HYP_GCD_ID, grid, exact=_synthetic(FormulaId.HYP_GCD_ID, grid, {"c1": 0.74, "c2": 0.35}, 1e-5)
    )
    assert quiet.stable
    loud = vf.fit_parameters(
        FormulaId.HYP_GCD_ID, grid, exact=_synthetic(FormulaId.HYP_GCD_ID, grid, {"c1": 0.74, "c2": 0.35}, 1e4)
    )
    assert not loud.stable


def test_fit_errors():
    with pytest.raises(UsageError):
        vf.fit_parameters(FormulaId.OMEGA_GCD, GRID)
    with pytest.raises(UsageError):
        vf.fit_parameters(FormulaId.TAU_LCM, [1e3, 1e4, 1e5, 1e6])
    # a near-degenerate grid makes x log x and x indistinguishable
    tight = [1e6 * (1 + 1e-13 * i) for i in range(8)]
    with pytest.raises(ConditioningError):
        vf.fit_parameters(FormulaId.HYP_GCD_ID, tight, exact=[1.0] * 8)


def test_fit_report_rows_and_derived():
    grid = vf.default_grid(FormulaId.HYP_GCD_ID)
    d = {"c1": 0.7443412763914568, "c2": 0.35462538523759934}
    rep = vf.fit_parameters(FormulaId.HYP_GCD_ID, grid, exact=_synthetic(FormulaId.HYP_GCD_ID, grid, d))
    dev = rep.deviation_from_derived()
    assert set(dev) == {"c1", "c2"} and max(dev.values()) < 1e-8
    rows = rep.rows()
    assert {r["parameter"] for r in rows} == {"c1", "c2"}
    assert all(r["derived"] is not None and r["version"] for r in rows)
    tau = vf.fit_parameters(
        FormulaId.TAU_LCM, grid, exact=_synthetic(FormulaId.TAU_LCM, grid, {"C2": 1.0, "C3": 1.0, "C4": 1.0})
    )
    assert tau.deviation_from_derived() == {}


@given(st.integers(-(2**70), 2**70), st.floats(-1e6, 1e6))
def test_residual_of_big_integer_sum(exact, offset):
    main = float(exact) + offset
    r = vf._residual(exact, main)
    # exact rational reference: exact - main, with main taken as its binary value
    from fractions import Fraction

    ref = float(Fraction(exact) - Fraction(main))
    assert r == pytest.approx(ref, abs=1e-9 * max(1.0, abs(main)) * 2**-20 + 2.0**-30 * abs(ref) + 1e-9)

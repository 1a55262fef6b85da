"""Exact summatory values: hyperbolic, rectangular and one-variable sums at real x.

Everything works with y = floor(x). Hyperbola-method routes loop over
d <= sqrt(y) and read T(y // d^2) from the prefix array of a sieved table,
so a grid of x values costs one table build plus O(sqrt(x)) per point.
Integer sums are returned as Python ints and never wrap: when an int64
dot product could overflow the accumulation drops to object arrays.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ResourceError, UsageError
from .formulas import FormulaId, parse_formula
from .sieve import (
    ADDITIVE,
    COMPLETELY_ADDITIVE,
    FLOAT,
    INT,
    Family,
    FunctionSpec,
    TableOverflowError,
    TableStore,
    ValueTable,
    default_store,
    dirichlet_convolve,
    from_array,
)

RECT_CAP = 10**5
GCD_METHODS = ("direct", "via_2omega", "via_tau", "convolute")
LCM_METHODS = ("auto", "direct", "lf2", "psi_tau2", "additive", "id_route")
RATIO_METHODS = ("accumulate", "hyperbola")
RECT_KINDS = ("gcd", "lcm", "gcd_over_lcm")
AUX_NAMES = (
    "tau",
    "two_pow_omega",
    "omega",
    "big_omega",
    "jordan2",
    "tau_squared",
    "tau_log",
    "omega_tau",
    "bigomega_tau",
)

_I64_SAFE = 2**62


def _floor(x) -> int:
    if isinstance(x, (int, np.integer)):
        y = int(x)
    else:
        y = int(math.floor(float(x)))
    if y < 1:
        raise UsageError(f"x must be >= 1, got {x}")
    return y


def _store(store) -> TableStore:
    return store if store is not None else default_store()


def _weighted_sum(w: np.ndarray, t: np.ndarray):
    """sum w*t exactly (ints) or with fsum (floats)."""
    if w.dtype.kind == "f" or t.dtype.kind == "f":
        return math.fsum(np.asarray(w, dtype=np.float64) * np.asarray(t, dtype=np.float64))
    bound = float(np.abs(w).astype(np.float64) @ np.abs(t).astype(np.float64))
    if bound < _I64_SAFE:
        return int(np.dot(w.astype(np.int64), t.astype(np.int64)))
    return int(np.dot(w.astype(object), t.astype(object)))


_BLOCK_PREFIX = weakref.WeakKeyDictionary()


def _block_prefix(table: ValueTable):
    """(block length, Python-int prefix over whole blocks) for tables whose prefix overflows int64."""
    got = _BLOCK_PREFIX.get(table)
    if got is None:
        vals = table.values
        top = max(int(np.abs(vals).max()), 1)
        blk = max(1, min(1 << 20, _I64_SAFE // top))
        n_blocks = len(vals) // blk
        sums = vals[: n_blocks * blk].reshape(n_blocks, blk).sum(axis=1)
        pre = [0]
        for v in sums:
            pre.append(pre[-1] + int(v))
        got = (blk, pre)
        _BLOCK_PREFIX[table] = got
    return got


def _prefix_at(table: ValueTable, idx: np.ndarray) -> np.ndarray:
    """Prefix sums of a table at many points, exact Python ints once int64 would overflow."""
    try:
        return table.prefix[idx]
    except TableOverflowError:
        blk, pre = _block_prefix(table)
        vals = table.values
        out = np.empty(len(idx), dtype=object)
        for i, y in enumerate(np.asarray(idx).tolist()):
            b = (y + 1) // blk
            out[i] = pre[b] + int(vals[b * blk : y + 1].sum())
        return out


# --------------------------------------------------------------------------
# hyperbolic gcd sums


def sum_gcd_hyperbolic(spec: FunctionSpec, x, method="via_2omega", store=None):
    """Exact sum of f(gcd(m,n)) over m*n <= x."""
    y = _floor(x)
    st = _store(store)
    r = math.isqrt(y)
    d = np.arange(1, r + 1)
    idx = y // (d * d)
    if method == "via_2omega":
        f = st.f(spec, r).values[1 : r + 1]
        T = _prefix_at(st.standard("two_pow_omega", y), idx)
        return _weighted_sum(f, T)
    if method == "via_tau":
        h = st.h(spec, r).values[1 : r + 1]
        T = _prefix_at(st.standard("tau", y), idx)
        return _weighted_sum(h, T)
    if method == "direct":
        f = st.f(spec, y).values
        return kernels.pair_sum(f[: y + 1], y, 0)
    if method == "convolute":
        from .convolutes import gf_from_values

        f = st.f(spec, y).values[: y + 1]
        tw = st.standard("two_pow_omega", y).values[: y + 1]
        G = gf_from_values(f, tw)
        return _table_total(G)
    raise UsageError(f"unknown method {method!r}; choose from {', '.join(GCD_METHODS)}")


def _table_total(vals: np.ndarray):
    if vals.dtype.kind == "f":
        return math.fsum(vals[1:])
    if float(np.abs(vals).sum(dtype=np.float64)) >= _I64_SAFE:
        return int(vals[1:].sum(dtype=object))
    return int(vals[1:].sum())


# --------------------------------------------------------------------------
# hyperbolic lcm sums


def _lcm_route(spec: FunctionSpec):
    if spec.family is Family.TAU:
        return "psi_tau2"
    if spec.family is Family.ID:
        return "id_route"
    if spec.additivity in (ADDITIVE, COMPLETELY_ADDITIVE):
        return "additive"
    return "lf2"


def sum_lcm_hyperbolic(spec: FunctionSpec, x, method="auto", store=None):
    """Exact sum of f(lcm(m,n)) over m*n <= x.

    ``auto`` picks the cheapest identity for the family: psi * tau^2 for tau,
    sum a W(x/a^2) with W the prefix of c 2^omega(c) for Id, the gcd/lcm
    additive relation for additive f, and the a^2 c identity otherwise.
    """
    y = _floor(x)
    st = _store(store)
    if method == "auto":
        method = _lcm_route(spec)
    if method == "direct":
        return kernels.pair_sum(st.f(spec, y).values[: y + 1], y, 1)
    if method == "psi_tau2":
        if spec.family is not Family.TAU:
            raise UsageError("psi_tau2 only applies to tau")
        psi = st.standard("psi", y).values[: y + 1]
        d = np.flatnonzero(psi)
        return _weighted_sum(psi[d], _prefix_at(st.standard("tau_squared", y), y // d))
    if method == "id_route":
        if spec.family is not Family.ID:
            raise UsageError("id_route only applies to f(n) = n")
        W = st.get("aux:c_two_pow_omega", y, _c_two_pow_omega)
        a = np.arange(1, math.isqrt(y) + 1)
        return _weighted_sum(a, _prefix_at(W, y // (a * a)))
    if method == "additive":
        return _lcm_additive(spec, y, st)
    if method == "lf2":
        from .convolutes import _lf2

        f = st.f(spec, y).values[: y + 1]
        if f.dtype.kind != "f" and 4.0 * y * float(np.abs(f).max()) >= _I64_SAFE:
            raise TableOverflowError(f"lcm table for {spec} may overflow int64")
        L = _lf2(f, st.standard("two_pow_omega", y).values[: y + 1])
        return _table_total(L)
    raise UsageError(f"unknown method {method!r}; choose from {', '.join(LCM_METHODS)}")


def _c_two_pow_omega(n_max):
    from .sieve import sieve_standard

    tw = sieve_standard("two_pow_omega", n_max).values
    return ValueTable("c*2^omega(c)", tw * np.arange(n_max + 1, dtype=np.int64), INT)


def _lcm_additive(spec, y, st):
    if spec.additivity not in (ADDITIVE, COMPLETELY_ADDITIVE):
        raise UsageError(f"{spec} is not additive")
    f = st.f(spec, y).values[1 : y + 1]
    G = sum_gcd_hyperbolic(spec, y, "via_2omega", st)
    n = np.arange(1, y + 1)
    if spec.additivity == COMPLETELY_ADDITIVE:
        # sum_{n<=y} f(n) tau(n) - G
        first = _weighted_sum(f, st.standard("tau", y).values[1 : y + 1])
    else:
        # 2 sum_{k<=y} (f*1)(k) - G = 2 sum_{d<=y} f(d) floor(y/d) - G
        first = 2 * _weighted_sum(f, y // n)
    return first - G


# --------------------------------------------------------------------------
# hyperbolic gcd/lcm ratio


def sum_gcd_over_lcm_hyperbolic(x, method="accumulate", store=None) -> float:
    """sum over m*n <= x of gcd(m,n)/lcm(m,n) = sum_{n<=x} G(n)/n, G(n) = sum_{ab=n} gcd(a,b)^2."""
    y = _floor(x)
    st = _store(store)
    if method == "accumulate":
        # G(n) = sum_{d^2 k = n} jordan2(d) tau(k), since mu * id^2 = jordan2
        from .convolutes import gf_from_values

        r = math.isqrt(y)
        h = np.zeros(y + 1, dtype=np.int64)
        h[: r + 1] = st.standard("jordan2", r).values[: r + 1]
        G = gf_from_values(h, st.standard("tau", y).values[: y + 1])
        n = np.arange(1, y + 1, dtype=np.float64)
        return math.fsum(G[1:] / n)
    if method == "hyperbola":
        # sum_d jordan2(d)/d^2 * sum_{k <= y/d^2} tau(k)/k
        r = math.isqrt(y)
        d = np.arange(1, r + 1)
        j2 = st.standard("jordan2", r).values[1 : r + 1].astype(np.float64)
        P = st.get("aux:tau_over_n", y, _tau_over_n).prefix
        return math.fsum(j2 / (d * d).astype(np.float64) * P[y // (d * d)])
    raise UsageError(f"unknown method {method!r}; choose from {', '.join(RATIO_METHODS)}")


def _tau_over_n(n_max):
    from .sieve import sieve_standard

    tau = sieve_standard("tau", n_max).values.astype(np.float64)
    n = np.arange(n_max + 1, dtype=np.float64)
    n[0] = 1.0
    return ValueTable("tau(n)/n", tau / n, FLOAT)


# --------------------------------------------------------------------------
# rectangular sums


def sum_rectangular(kind: str, x, store=None):
    """Sum over all m, n <= x of gcd, lcm or gcd/lcm, by the triangular reduction
    2 sum_{n<=x} T(n) - sum_{n<=x} F(n, n) with T(n) = sum_{m<=n} F(m, n)."""
    if kind not in RECT_KINDS:
        raise UsageError(f"kind must be one of {RECT_KINDS}")
    y = _floor(x)
    if y > RECT_CAP:
        raise ResourceError(f"rectangular sums are capped at x={RECT_CAP}")
    st = _store(store)
    phi = st.standard("phi", y).truncated(y)
    n = np.arange(y + 1, dtype=np.int64)
    if kind == "gcd":
        # T = id * phi (the gcd-sum function), diagonal gcd(n, n) = n
        T = dirichlet_convolve(from_array("id", n), phi).values
        return 2 * int(T[1:].sum(dtype=object)) - y * (y + 1) // 2
    if kind == "lcm":
        # T(n) = n (1 + sum_{e|n} e phi(e)) / 2, diagonal lcm(n, n) = n
        ephi = from_array("e*phi(e)", n * phi.values)
        one = st.standard("one", y).truncated(y)
        s = dirichlet_convolve(one, ephi).values.astype(object)
        T = n.astype(object) * (1 + s) // 2
        return 2 * int(T[1:].sum()) - y * (y + 1) // 2
    # gcd/lcm: T(n) = sum_{e|n} r(e), r(e) = (1/e) sum_{k|e} mu(k)/k H(e/k),
    # where H is the harmonic number; the diagonal contributes 1 per n
    mu = st.standard("mu", y).values[: y + 1].astype(np.float64)
    nf = n.astype(np.float64)
    nf[0] = 1.0
    H = np.zeros(y + 1)
    H[1:] = kernels.compensated_cumsum(1.0 / nf[1:])
    mu_over = from_array("mu/k", np.where(n > 0, mu / nf, 0.0))
    inner = dirichlet_convolve(mu_over, from_array("H", H)).values / nf
    T = dirichlet_convolve(from_array("r", inner), st.standard("one", y).truncated(y)).values
    return 2.0 * math.fsum(T[1:]) - y


# --------------------------------------------------------------------------
# one-variable sums


def _aux_table(name, n_max):
    from .sieve import pointwise, sieve_standard

    if name == "tau_log":
        tau = sieve_standard("tau", n_max).values.astype(np.float64)
        logs = np.zeros(n_max + 1)
        logs[1:] = np.log(np.arange(1, n_max + 1, dtype=np.float64))
        return ValueTable("tau*log", tau * logs, FLOAT)
    if name == "omega_tau":
        return pointwise("omega*tau", sieve_standard("omega", n_max), sieve_standard("tau", n_max))
    if name == "bigomega_tau":
        return pointwise("bigomega*tau", sieve_standard("big_omega", n_max), sieve_standard("tau", n_max))
    raise UsageError(f"unknown auxiliary table {name!r}")  # pragma: no cover


def summatory_auxiliary(name: str, x, store=None):
    """Exact prefix sum over n <= x of one of AUX_NAMES."""
    if name not in AUX_NAMES:
        raise UsageError(f"unknown auxiliary sum {name!r}; choose from {', '.join(AUX_NAMES)}")
    y = _floor(x)
    st = _store(store)
    if name in ("tau_log", "omega_tau", "bigomega_tau"):
        table = st.get(f"aux:{name}", y, lambda n: _aux_table(name, n))
    else:
        table = st.standard(name, y)
    out = _prefix_at(table, np.array([y]))[0]
    return float(out) if table.kind == FLOAT else int(out)


# --------------------------------------------------------------------------
# curves


@dataclass
class SummatoryCurve:
    formula: FormulaId
    grid: list
    exact: list = field(default_factory=list)

    def monotone(self) -> bool:
        return all(b >= a for a, b in zip(self.exact, self.exact[1:]))


_FAMILY_SPEC = {
    FormulaId.TAU_GCD: FunctionSpec.tau(),
    FormulaId.HYP_GCD_ID: FunctionSpec.id(),
    FormulaId.RECIP_GCD: FunctionSpec.reciprocal(),
    FormulaId.LOG_GCD: FunctionSpec.log(),
    FormulaId.LOGKAPPA_GCD: FunctionSpec.log_kappa(),
    FormulaId.OMEGA_GCD: FunctionSpec.omega(),
    FormulaId.BIGOMEGA_GCD: FunctionSpec.big_omega(),
    FormulaId.LCM_HYP: FunctionSpec.id(),
    FormulaId.LOG_LCM: FunctionSpec.log(),
    FormulaId.OMEGA_LCM: FunctionSpec.omega(),
    FormulaId.BIGOMEGA_LCM: FunctionSpec.big_omega(),
    FormulaId.TAU_LCM: FunctionSpec.tau(),
}
_LCM_FORMULAS = (FormulaId.LCM_HYP, FormulaId.LOG_LCM, FormulaId.OMEGA_LCM, FormulaId.BIGOMEGA_LCM, FormulaId.TAU_LCM)
_RECT = {FormulaId.RECT_GCD: "gcd", FormulaId.RECT_LCM: "lcm", FormulaId.RECT_RATIO: "gcd_over_lcm"}
_AUX = {
    FormulaId.AUX_2OMEGA: "two_pow_omega",
    FormulaId.AUX_TAU: "tau",
    FormulaId.AUX_JORDAN2: "jordan2",
    FormulaId.AUX_OMEGA: "omega",
    FormulaId.AUX_TAU_LOG: "tau_log",
    FormulaId.AUX_TAU2: "tau_squared",
}


def formula_kind(formula) -> str:
    """One of 'gcd', 'lcm', 'ratio', 'rect', 'aux'."""
    F = parse_formula(formula)
    if F in _LCM_FORMULAS:
        return "lcm"
    if F is FormulaId.RATIO_HYP:
        return "ratio"
    if F in _RECT:
        return "rect"
    if F in _AUX:
        return "aux"
    return "gcd"


def formula_spec(formula, spec: FunctionSpec | None = None) -> FunctionSpec | None:
    """The f a formula sums over: fixed by the formula, or the caller's spec for the generic ones."""
    F = parse_formula(formula)
    if F.needs_spec:
        if spec is None:
            raise UsageError(f"{F.value} needs a function spec")
        if F is FormulaId.FSETA_GCD and spec.as_s_eta() is None:
            raise UsageError(f"{spec} is not of the f_(S,eta) form")
        return spec
    return _FAMILY_SPEC.get(F)


def methods_for(formula, spec: FunctionSpec | None = None) -> tuple:
    """Every summation route that applies to a formula; the first is the default."""
    kind = formula_kind(formula)
    if kind == "gcd":
        return ("via_2omega", "direct", "via_tau", "convolute")
    if kind == "ratio":
        return ("hyperbola", "accumulate")
    if kind == "lcm":
        f = formula_spec(formula, spec)
        out = ["auto", "direct", "lf2"]
        if f.family is Family.TAU:
            out.append("psi_tau2")
        if f.family is Family.ID:
            out.append("id_route")
        if f.additivity != "none":
            out.append("additive")
        return tuple(out)
    return ("default",)


def exact_sum(formula, x, spec: FunctionSpec | None = None, store=None, method=None):
    """The left-hand side of a formula at x, by the default route or a named one."""
    F = parse_formula(formula)
    st = _store(store)
    kind = formula_kind(F)
    allowed = methods_for(F, spec)
    method = allowed[0] if method is None else method
    if method not in allowed:
        raise UsageError(f"method {method!r} does not apply to {F.value}; choose from {allowed}")
    if kind == "gcd":
        return sum_gcd_hyperbolic(formula_spec(F, spec), x, method, st)
    if kind == "lcm":
        return sum_lcm_hyperbolic(formula_spec(F, spec), x, method, st)
    if kind == "ratio":
        return sum_gcd_over_lcm_hyperbolic(x, method, st)
    if kind == "rect":
        return sum_rectangular(_RECT[F], x, st)
    return summatory_auxiliary(_AUX[F], x, st)


def curve(formula, grid, spec=None, store=None) -> SummatoryCurve:
    """Exact sums along a grid; tables are sized once for the largest point."""
    F = parse_formula(formula)
    st = _store(store)
    grid = [float(g) for g in grid]
    vals = {}
    for x in sorted(grid, reverse=True):
        vals[x] = exact_sum(F, x, spec, st)
    return SummatoryCurve(F, grid, [vals[x] for x in grid])

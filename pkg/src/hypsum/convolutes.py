"""G_f(n) = sum_{ab=n} f(gcd(a,b)) and L_f(n) = sum_{ab=n} f(lcm(a,b)).

Each table can be built several ways so the routes can check one another:

    Gf1  sum over a^2 b^2 c = n of f(a) mu(b) tau(c)
    Gf2  sum over a^2 c = n of (mu*f)(a) tau(c)
    Gf3  sum over a^2 c = n of f(a) 2^omega(c)
    Lf1  sum over a^2 b^2 c = n of f(n/a) mu(b) tau(c)
    Lf2  sum over a^2 c = n of f(ac) 2^omega(c)

plus the additive shortcuts L = 2(f*1) - G and L = f tau - G, and
L_tau = psi * tau^2. All builders walk the outer variable and add a strided
slice, so the cost is O(n_max) per table.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import constants, kernels
from .constants import ConstantEstimate
from .errors import UsageError
from .sieve import (
    ADDITIVE,
    COMPLETELY_ADDITIVE,
    FLOAT,
    INT,
    FunctionSpec,
    TableOverflowError,
    ValueTable,
    build_f_table,
    build_h_table,
    dirichlet_convolve,
    sieve_standard,
)

GCD_METHODS = ("brute", "Gf1", "Gf2", "Gf3")
LCM_METHODS = ("brute", "Lf1", "Lf2", "additive_relation", "psi_tau2")

_I64_SAFE = 2**62


@dataclass(frozen=True)
class ConvoluteTable:
    base_spec: FunctionSpec
    side: str
    method: str
    table: ValueTable

    @property
    def values(self):
        return self.table.values

    @property
    def n_max(self):
        return self.table.n_max


def _wrap(spec, side, method, vals, kind):
    vals[0] = 0
    name = f"{'G' if side == 'gcd' else 'L'}[{spec}]/{method}"
    return ConvoluteTable(spec, side, method, ValueTable(name, vals, kind))


def _check_int_bound(bound, what):
    if bound >= _I64_SAFE:
        raise TableOverflowError(f"{what} may overflow int64")


# --------------------------------------------------------------------------
# brute force


def _pairs_value(f, n, spf, side):
    """Sum of f over gcd or lcm of the ordered pairs (d, n/d)."""
    divs = _divisors_from_spf(n, spf)
    total = 0.0 if f.dtype.kind == "f" else 0
    terms = []
    for d in divs:
        e = n // d
        g = math.gcd(d, e)
        terms.append(f[g] if side == "gcd" else f[d // g * e])
    if f.dtype.kind == "f":
        return math.fsum(float(t) for t in terms)
    for t in terms:
        total += int(t)
    return total


def _divisors_from_spf(n, spf):
    divs = [1]
    while n > 1:
        p = int(spf[n])
        k = 0
        while n % p == 0:
            n //= p
            k += 1
        divs = [d * p**i for d in divs for i in range(k + 1)]
    return divs


def gf_brute(spec: FunctionSpec, n: int):
    """G_f(n) by enumerating the divisor pairs of n."""
    n = int(n)
    if n < 1:
        raise UsageError("n must be >= 1")
    return _pairs_value(build_f_table(spec, n).values, n, kernels.spf_table(n), "gcd")


def lf_brute(spec: FunctionSpec, n: int):
    """L_f(n) by enumerating the divisor pairs of n."""
    n = int(n)
    if n < 1:
        raise UsageError("n must be >= 1")
    return _pairs_value(build_f_table(spec, n).values, n, kernels.spf_table(n), "lcm")


def brute_table(spec: FunctionSpec, n_max: int, side: str) -> ConvoluteTable:
    """Whole G_f or L_f table by walking every pair (a, b) with ab <= n_max."""
    if side not in ("gcd", "lcm"):
        raise UsageError("side must be 'gcd' or 'lcm'")
    f = build_f_table(spec, n_max)
    vals = np.zeros(n_max + 1, dtype=f.values.dtype)
    for a in range(1, n_max + 1):
        b = np.arange(1, n_max // a + 1, dtype=np.int64)
        g = np.gcd(a, b)
        vals[a * b] += f.values[g] if side == "gcd" else f.values[(a // g) * b]
    return _wrap(spec, side, "brute", vals, f.kind)


# --------------------------------------------------------------------------
# identity builders on raw arrays


def gf_from_values(f: np.ndarray, two_omega: np.ndarray) -> np.ndarray:
    """G from f via sum_{a^2 c = n} f(a) 2^omega(c)."""
    n_max = len(f) - 1
    out = np.zeros(n_max + 1, dtype=np.result_type(f.dtype, two_omega.dtype))
    for a in range(1, math.isqrt(n_max) + 1):
        if f[a]:
            q = a * a
            out[q::q] += f[a] * two_omega[1 : n_max // q + 1]
    return out


def _gf1(f, mu, tau):
    n_max = len(f) - 1
    out = np.zeros(n_max + 1, dtype=f.dtype)
    r = math.isqrt(n_max)
    for a in range(1, r + 1):
        if not f[a]:
            continue
        for b in range(1, r // a + 1):
            if mu[b]:
                q = (a * b) ** 2
                out[q::q] += (f[a] * mu[b]) * tau[1 : n_max // q + 1]
    return out


def _gf2(h, tau):
    return gf_from_values(h, tau)


def _lf1(f, mu, tau):
    n_max = len(f) - 1
    out = np.zeros(n_max + 1, dtype=f.dtype)
    r = math.isqrt(n_max)
    for a in range(1, r + 1):
        for b in range(1, r // a + 1):
            if not mu[b]:
                continue
            q = (a * b) ** 2
            m = n_max // q
            # n = q c and n / a = a b^2 c
            step = a * b * b
            out[q::q] += mu[b] * f[step::step][:m] * tau[1 : m + 1]
    return out


def _lf2(f, two_omega):
    n_max = len(f) - 1
    out = np.zeros(n_max + 1, dtype=f.dtype)
    for a in range(1, math.isqrt(n_max) + 1):
        q = a * a
        m = n_max // q
        out[q::q] += f[a::a][:m] * two_omega[1 : m + 1]
    return out


def _int_guard(f: ValueTable, n_max, what):
    if f.kind == INT:
        # every partial sum is at most tau_3(n) max|f| <= tau(n)^2 max|f| <= 4 n max|f|
        _check_int_bound(4.0 * n_max * float(np.abs(f.values).max()), what)


def gf_table_identity(spec: FunctionSpec, n_max: int, which: str = "Gf3") -> ConvoluteTable:
    """G_f on 1..n_max from one of the three gcd identities."""
    n_max = int(n_max)
    if n_max < 1:
        raise UsageError("n_max must be >= 1")
    if which not in ("Gf1", "Gf2", "Gf3"):
        raise UsageError(f"unknown gcd identity {which!r}")
    f = build_f_table(spec, n_max)
    _int_guard(f, n_max, f"G[{spec}]")
    if which == "Gf1":
        vals = _gf1(f.values, sieve_standard("mu", n_max).values, sieve_standard("tau", n_max).values)
    elif which == "Gf2":
        h = build_h_table(spec, n_max)
        vals = _gf2(h.values, sieve_standard("tau", n_max).values)
    else:
        vals = gf_from_values(f.values, sieve_standard("two_pow_omega", n_max).values)
    return _wrap(spec, "gcd", which, vals.astype(f.values.dtype), f.kind)


def lf_table_identity(spec: FunctionSpec, n_max: int, which: str = "Lf2") -> ConvoluteTable:
    """L_f on 1..n_max from one of the two lcm identities."""
    n_max = int(n_max)
    if n_max < 1:
        raise UsageError("n_max must be >= 1")
    if which not in ("Lf1", "Lf2"):
        raise UsageError(f"unknown lcm identity {which!r}")
    f = build_f_table(spec, n_max)
    _int_guard(f, n_max, f"L[{spec}]")
    if which == "Lf1":
        vals = _lf1(f.values, sieve_standard("mu", n_max).values, sieve_standard("tau", n_max).values)
    else:
        vals = _lf2(f.values, sieve_standard("two_pow_omega", n_max).values)
    return _wrap(spec, "lcm", which, vals, f.kind)


def lf_via_additive_relation(spec: FunctionSpec, n_max: int) -> ConvoluteTable:
    """L_f = f tau - G_f (completely additive) or 2(f*1) - G_f (additive)."""
    if spec.additivity not in (ADDITIVE, COMPLETELY_ADDITIVE):
        raise UsageError(f"{spec} is not additive; the gcd/lcm relation does not apply")
    n_max = int(n_max)
    f = build_f_table(spec, n_max)
    G = gf_table_identity(spec, n_max, "Gf3").values
    if spec.additivity == COMPLETELY_ADDITIVE:
        first = f.values * sieve_standard("tau", n_max).values
    else:
        first = 2 * dirichlet_convolve(f, sieve_standard("one", n_max)).values
    return _wrap(spec, "lcm", "additive_relation", first - G, f.kind)


def lf_tau_via_psi(n_max: int) -> ConvoluteTable:
    """L_tau = psi * tau^2."""
    n_max = int(n_max)
    vals = dirichlet_convolve(sieve_standard("psi", n_max), sieve_standard("tau_squared", n_max)).values.copy()
    return _wrap(FunctionSpec.tau(), "lcm", "psi_tau2", vals, INT)


def convolute(spec: FunctionSpec, n_max: int, side: str, method: str) -> ConvoluteTable:
    """Dispatch on (side, method) names as listed in GCD_METHODS / LCM_METHODS."""
    if side == "gcd":
        if method == "brute":
            return brute_table(spec, n_max, "gcd")
        return gf_table_identity(spec, n_max, method)
    if side == "lcm":
        if method == "brute":
            return brute_table(spec, n_max, "lcm")
        if method == "additive_relation":
            return lf_via_additive_relation(spec, n_max)
        if method == "psi_tau2":
            if spec != FunctionSpec.tau():
                raise UsageError("psi_tau2 only applies to tau")
            return lf_tau_via_psi(n_max)
        return lf_table_identity(spec, n_max, method)
    raise UsageError("side must be 'gcd' or 'lcm'")


def agree(a: np.ndarray, b: np.ndarray, rel=1e-12, floor=1e-15) -> bool:
    """Exact equality for int arrays, relative tolerance with an absolute floor otherwise."""
    if a.dtype.kind in "iu" and b.dtype.kind in "iu":
        return bool(np.array_equal(a, b))
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return bool(np.all(np.abs(a - b) <= np.maximum(rel * np.maximum(np.abs(a), np.abs(b)), floor)))


# --------------------------------------------------------------------------
# Dirichlet series check


def _sum_f_over_d2(U, m, partial_m):
    """Upper bound y -> sum_{d <= y} |f(d)|/d^2 given the exact sum to m and U >= summatory of |f|."""
    from scipy import integrate

    lm = math.log(m)

    def bound(y):
        if y <= m:
            return partial_m
        # int_m^y U(u) u^-3 du with u = e^v
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, e = integrate.quad(lambda v: U(math.exp(v)) * math.exp(-2.0 * v), lm, math.log(y), limit=200)
        return partial_m + U(y) / y**2 + 2.0 * (v + abs(e)) * (1 + 1e-6)

    return bound


def dirichlet_series_check(spec, z: float, n_terms: int = 10**5):
    """Both sides of sum G_f(n)/n^z = zeta(z)^2/zeta(2z) sum f(n)/n^(2z), truncated at n_terms.

    Each side is returned as a ConstantEstimate for the full infinite series:
    the truncated sum plus a rigorous tail allowance. The two intervals must
    overlap. ``spec`` may also be a ValueTable, which is only accepted when it
    is identically zero (no tail bound is known for arbitrary tables).
    """
    n_terms = int(n_terms)
    if n_terms < 100:
        raise UsageError("n_terms must be >= 100")
    if isinstance(spec, ValueTable):
        if np.any(spec.values[1:]):
            raise UsageError("explicit tables are only supported for the zero function")
        zero = ConstantEstimate("series", 0.0, 0.0, "series_direct")
        return zero.named("lhs"), zero.named("rhs")
    beta = spec.growth[0]
    if z <= max(1.0, (1.0 + beta) / 2.0):
        raise UsageError(f"series diverge for z={z} (need z > max(1, (1+beta)/2) = {max(1.0, (1 + beta) / 2)})")
    f = build_f_table(spec, n_terms).values.astype(np.float64)
    tw = sieve_standard("two_pow_omega", n_terms).values
    G = gf_from_values(f, tw.astype(np.float64))
    n = np.arange(n_terms + 1, dtype=np.float64)
    n[0] = 1.0
    lhs_terms = G[1:] * n[1:] ** -z
    rhs_terms = f[1:] * n[1:] ** (-2.0 * z)
    lhs_part = math.fsum(lhs_terms)
    rhs_part = math.fsum(rhs_terms)
    x = float(n_terms)

    U = constants.summatory_majorant(spec)
    m = math.isqrt(n_terms)
    partial_m = math.fsum(np.abs(f[1 : m + 1]) / n[1 : m + 1] ** 2)
    if U is None:
        # pointwise bound only: sum_{m<d<=y} |f(d)|/d^2 <= B(y)/m
        B = constants.pointwise_majorant(spec)
        if z <= 1.0 + max(beta, 0.0) / 2.0:
            raise UsageError(f"no tail bound for {spec} at z={z}; need z > {1 + max(beta, 0) / 2}")
        F2 = lambda y: partial_m + (B(y) / m if y > m else 0.0)
    else:
        F2 = _sum_f_over_d2(U, m, partial_m)
    # sum_{n<=t} |G(n)| <= sum_{d<=sqrt t} |f(d)| T_tau(t/d^2) <= t (log t + 1) F2(sqrt t)
    U_G = lambda t: t * (math.log(t) + 1.0) * F2(math.sqrt(t))
    lhs_tail = constants.partial_summation_tail(U_G, 0, z, x)
    if U is not None:
        f_tail = constants.partial_summation_tail(U, 0, 2.0 * z, x)
    else:
        from scipy import integrate

        B = constants.pointwise_majorant(spec)
        g = lambda t: B(t) * t ** (-2.0 * z)
        v, e = integrate.quad(g, x, math.inf, limit=200)
        f_tail = (v + g(x + 1.0)) * (1 + 1e-6) + 2 * abs(e)

    eps = constants.EPS
    lhs = ConstantEstimate(
        f"sum G/n^{z:g}",
        lhs_part + lhs_tail / 2,
        lhs_tail / 2 + (math.log2(n_terms) + 8) * eps * math.fsum(np.abs(lhs_terms)),
        "series_direct",
    )
    zz = constants.zeta(z) ** 2 / constants.zeta(2.0 * z)
    fs = ConstantEstimate(
        f"sum f/n^{2 * z:g}",
        rhs_part + f_tail / 2,
        f_tail / 2 + (math.log2(n_terms) + 8) * eps * math.fsum(np.abs(rhs_terms)),
        "series_direct",
    )
    rhs = (zz * fs).named(f"zeta^2/zeta * sum f/n^{2 * z:g}", "composite")
    return lhs, rhs

"""Naive reference computations used by the tests and the ``--oracle`` flag.

Nothing here touches the sieve module, the compiled kernels or any
convolution identity: f values come from their definitions, gcds from
Euclid, and every sum is a plain loop over the pairs it describes. That
independence is the point, so the code is deliberately unoptimised beyond
numpy vectorisation of the inner loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ResourceError, UsageError
from .sieve import Family, FunctionSpec

HYPERBOLIC_CAP = 10**6
RECTANGULAR_CAP = 3000
CONVOLUTE_CAP = 10**7
TABLE_CAP = 10**6

HYPERBOLIC_KINDS = ("gcd_f", "lcm_f", "ratio")
RECTANGULAR_KINDS = ("gcd", "lcm", "ratio")


@dataclass(frozen=True)
class OracleResult:
    quantity: str
    argument: float
    value: int | float

    def as_row(self):
        return {"quantity": self.quantity, "argument": self.argument, "value": self.value}


# --------------------------------------------------------------------------
# f from its definition


def _is_prime_mask(n_max):
    mask = np.ones(n_max + 1, dtype=bool)
    mask[:2] = False
    for p in range(2, math.isqrt(n_max) + 1):
        if mask[p]:
            mask[p * p :: p] = False
    return mask


def _prime_powers(n_max):
    """Yield (p, k, p**k) for every prime power <= n_max."""
    for p in np.flatnonzero(_is_prime_mask(n_max)):
        p = int(p)
        q, k = p, 1
        while q <= n_max:
            yield p, k, q
            q *= p
            k += 1


def f_values(spec: FunctionSpec, n_max: int) -> np.ndarray:
    """f(0..n_max) straight from the definition of each family (slot 0 is 0)."""
    fam = spec.family
    n = np.arange(n_max + 1)
    if fam is Family.ID:
        return n.astype(np.int64)
    if fam is Family.RECIPROCAL:
        out = np.zeros(n_max + 1)
        out[1:] = 1.0 / n[1:]
        return out
    if fam is Family.TAU:
        out = np.zeros(n_max + 1, dtype=np.int64)
        for d in range(1, n_max + 1):
            out[d::d] += 1
        return out
    if fam is Family.LOG:
        out = np.zeros(n_max + 1)
        out[1:] = np.log(n[1:])
        return out
    if fam is Family.POWER_LOG:
        out = np.zeros(n_max + 1)
        out[2:] = n[2:] ** spec.beta * np.log(n[2:]) ** spec.delta
        out[1] = 1.0 if spec.delta == 0 else 0.0
        return out
    # additive families: add the contribution of every p**k dividing n
    integer = spec.kind == "int"
    out = np.zeros(n_max + 1, dtype=np.int64 if integer else np.float64)
    for p, k, q in _prime_powers(n_max):
        if fam is Family.OMEGA:
            w = 1 if k == 1 else 0
        elif fam is Family.BIG_OMEGA:
            w = 1
        elif fam is Family.LOG_KAPPA:
            w = math.log(p) if k == 1 else 0.0
        else:
            w = (math.log(p) ** spec.eta if not integer else 1) if k in spec.S else 0
        if w:
            out[q::q] += w
    return out


def _factor(n):
    """Trial division by 2 and odd numbers up to sqrt(n)."""
    fac, d = {}, 2
    while d * d <= n:
        while n % d == 0:
            fac[d] = fac.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        fac[n] = fac.get(n, 0) + 1
    return fac


def f_value(spec: FunctionSpec, n: int):
    """f(n) for a single n from its factorisation."""
    fam = spec.family
    if fam is Family.ID:
        return n
    if fam is Family.RECIPROCAL:
        return 1.0 / n
    if fam is Family.LOG:
        return math.log(n)
    if fam is Family.POWER_LOG:
        if n == 1:
            return 1.0 if spec.delta == 0 else 0.0
        return n**spec.beta * math.log(n) ** spec.delta
    fac = _factor(n)
    if fam is Family.TAU:
        return math.prod(k + 1 for k in fac.values())
    if fam is Family.OMEGA:
        return len(fac)
    if fam is Family.BIG_OMEGA:
        return sum(fac.values())
    if fam is Family.LOG_KAPPA:
        return math.fsum(math.log(p) for p in fac)
    integer = spec.kind == "int"
    total = 0 if integer else 0.0
    for p, k in fac.items():
        cnt = sum(1 for nu in range(1, k + 1) if nu in spec.S)
        total += cnt if integer else math.log(p) ** spec.eta * cnt
    return total


def divisors(n):
    """Divisors of n by trial division, ascending."""
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


# --------------------------------------------------------------------------
# sums


def _total(parts, floating):
    return math.fsum(parts) if floating else sum(parts)


def _hyperbola_rows(y, r):
    for m in range(1, r + 1):
        yield m, np.arange(1, y // m + 1, dtype=np.int64)
    for n in range(1, r + 1):
        yield n, np.arange(r + 1, y // n + 1, dtype=np.int64)


def brute_hyperbolic(kind: str, spec: FunctionSpec | None, x) -> OracleResult:
    """Sum over all pairs m*n <= x of f(gcd), f(lcm) or gcd/lcm, pair by pair."""
    if kind not in HYPERBOLIC_KINDS:
        raise UsageError(f"kind must be one of {HYPERBOLIC_KINDS}")
    y = int(math.floor(x))
    if y > HYPERBOLIC_CAP:
        raise ResourceError(f"oracle hyperbolic sum capped at x={HYPERBOLIC_CAP}")
    if y < 1:
        return OracleResult(f"hyperbolic {kind}", x, 0)
    if kind != "ratio" and spec is None:
        raise UsageError("gcd_f and lcm_f need a function spec")
    f = f_values(spec, y) if kind != "ratio" else None
    floating = kind == "ratio" or f.dtype.kind == "f"
    parts = []
    r = math.isqrt(y)
    # pairs with m <= r, then pairs with m > r listed by their (small) n;
    # every summand is symmetric in m and n
    for m, n in _hyperbola_rows(y, r):
        g = np.gcd(m, n)
        if kind == "gcd_f":
            vals = f[g]
        elif kind == "lcm_f":
            vals = f[(m // g) * n]
        else:
            vals = (g * g) / (m * n.astype(np.float64))
        parts.append(math.fsum(vals) if floating else int(vals.sum()))
    label = kind if spec is None else f"{kind} {spec}"
    return OracleResult(f"hyperbolic {label}", x, _total(parts, floating))


def brute_rectangular(kind: str, x) -> OracleResult:
    """Sum over the full square m, n <= x with no symmetry reduction."""
    if kind not in RECTANGULAR_KINDS:
        raise UsageError(f"kind must be one of {RECTANGULAR_KINDS}")
    y = int(math.floor(x))
    if y > RECTANGULAR_CAP:
        raise ResourceError(f"oracle rectangular sum capped at x={RECTANGULAR_CAP}")
    n = np.arange(1, y + 1, dtype=np.int64)
    parts = []
    for m in range(1, y + 1):
        g = np.gcd(m, n)
        if kind == "gcd":
            parts.append(int(g.sum()))
        elif kind == "lcm":
            parts.append(int(((m // g) * n).sum()))
        else:
            parts.append(math.fsum((g * g) / (m * n.astype(np.float64))))
    return OracleResult(f"rectangular {kind}", x, _total(parts, kind == "ratio"))


def brute_ratio_exact(x) -> Fraction:
    """Hyperbolic gcd/lcm sum as an exact fraction (tiny x only)."""
    y = int(math.floor(x))
    if y > 2000:
        raise ResourceError("exact ratio oracle capped at x=2000")
    total = Fraction(0)
    for m in range(1, y + 1):
        for n in range(1, y // m + 1):
            g = math.gcd(m, n)
            total += Fraction(g * g, m * n)
    return total


def brute_convolute(side: str, spec: FunctionSpec, n: int) -> OracleResult:
    """G_f(n) (side 'gcd') or L_f(n) (side 'lcm') over ordered divisor pairs."""
    if side not in ("gcd", "lcm"):
        raise UsageError("side must be 'gcd' or 'lcm'")
    n = int(n)
    if n < 1:
        raise UsageError("n must be >= 1")
    if n > CONVOLUTE_CAP:
        raise ResourceError(f"oracle convolute capped at n={CONVOLUTE_CAP}")
    vals = []
    for a in divisors(n):
        b = n // a
        g = math.gcd(a, b)
        vals.append(f_value(spec, g if side == "gcd" else a // g * b))
    floating = any(isinstance(v, float) for v in vals)
    return OracleResult(f"{side} convolute {spec}", n, _total(vals, floating))


def convolute_table(side: str, spec: FunctionSpec, n_max: int) -> np.ndarray:
    """G_f or L_f on 0..n_max by scattering f over every pair (a, b) with ab <= n_max."""
    if side not in ("gcd", "lcm"):
        raise UsageError("side must be 'gcd' or 'lcm'")
    if n_max > TABLE_CAP:
        raise ResourceError(f"oracle convolute table capped at n={TABLE_CAP}")
    f = f_values(spec, n_max)
    out = np.zeros(n_max + 1, dtype=f.dtype)
    for a in range(1, n_max + 1):
        b = np.arange(1, n_max // a + 1, dtype=np.int64)
        g = np.gcd(a, b)
        idx = g if side == "gcd" else (a // g) * b
        # every a*b is distinct for fixed a, so fancy-index accumulation is safe
        out[a * b] += f[idx]
    return out

"""Named constants with rigorous truncation-error bounds.

Every number leaves this module as a :class:`ConstantEstimate`: a value, a
bound on |true - value| and a method tag. Bounds combine truncation (tails of
series over integers or primes, Euler-Maclaurin remainders) with a rounding
allowance, and are carried through arithmetic interval style.

Routes:

* zeta and its derivatives by Euler-Maclaurin, remainder bounded by the
  size of the last correction term (valid once the next derivative of the
  summand keeps one sign, which is checked from its log-polynomial);
* prime sums directly over a sieved prime list, tail bounded by partial
  summation against pi(t) <= 1.3 t / log t (t >= 17);
* accelerated prime sums: primes <= Q exactly, the rest through the prime
  zeta function P_Q(s) = sum_m mu(m)/m log zeta_Q(ms), where zeta_Q strips
  the Euler factors of p <= Q so the m-series converges like Q**(-ms).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import sieve
from .errors import PoleError, UsageError
from .formulas import FormulaId, parse_formula

EPS = np.finfo(float).eps

#: Euler's constant to 20 significant digits (standard tabulated value)
GAMMA_LITERAL = 0.57721566490153286061

#: primes up to this bound are summed exactly in accelerated routes
Q_CUT = 50

DEFAULT_P_MAX = 10**8
DEFAULT_SERIES_TERMS = 10**7
_QUAD_SAFETY = 1.0 + 1e-6
_U_MAX = 340.0

METHODS = (
    "zeta_euler_maclaurin",
    "prime_sum_direct",
    "prime_sum_accelerated",
    "euler_product",
    "series_direct",
    "composite",
    "literal",
)


# --------------------------------------------------------------------------
# interval-style estimates


def _round_allow(v):
    return 2.0 * EPS * abs(v)


@dataclass(frozen=True)
class ConstantEstimate:
    """value with |true - value| <= error_bound."""

    name: str
    value: float
    error_bound: float
    method: str = "composite"
    fit_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "error_bound", float(self.error_bound))
        if self.method not in METHODS:
            raise UsageError(f"unknown method tag {self.method!r}")
        if not self.fit_only and not (self.error_bound >= 0):
            raise UsageError(f"{self.name}: error bound must be >= 0")

    @classmethod
    def exact(cls, value, name="exact"):
        return cls(name, float(value), 0.0, "literal")

    @classmethod
    def fit_placeholder(cls, name):
        return cls(name, math.nan, math.nan, "composite", fit_only=True)

    @property
    def lo(self):
        return self.value - self.error_bound

    @property
    def hi(self):
        return self.value + self.error_bound

    def agrees(self, other: ConstantEstimate, slack=0.0) -> bool:
        return abs(self.value - other.value) <= self.error_bound + other.error_bound + slack

    def contains(self, x) -> bool:
        return abs(self.value - x) <= self.error_bound

    def named(self, name, method=None) -> ConstantEstimate:
        return replace(self, name=name, method=method or self.method)

    # arithmetic -------------------------------------------------------------
    @staticmethod
    def _c(other):
        if isinstance(other, ConstantEstimate):
            return other
        return ConstantEstimate("exact", float(other), 0.0, "literal")

    def _new(self, value, bound):
        return ConstantEstimate("composite", value, bound + _round_allow(value), "composite")

    def __add__(self, other):
        o = self._c(other)
        return self._new(self.value + o.value, self.error_bound + o.error_bound)

    __radd__ = __add__

    def __neg__(self):
        return ConstantEstimate("composite", -self.value, self.error_bound, "composite")

    def __sub__(self, other):
        return self + (-self._c(other))

    def __rsub__(self, other):
        return self._c(other) - self

    def __mul__(self, other):
        o = self._c(other)
        a, b, ea, eb = self.value, o.value, self.error_bound, o.error_bound
        return self._new(a * b, abs(a) * eb + abs(b) * ea + ea * eb)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._c(other)
        a, b, ea, eb = self.value, o.value, self.error_bound, o.error_bound
        if abs(b) <= eb:
            raise UsageError(f"division by an interval containing 0 ({b} +- {eb})")
        return self._new(a / b, (abs(a) * eb + abs(b) * ea) / (abs(b) * (abs(b) - eb)))

    def __rtruediv__(self, other):
        return self._c(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise UsageError("only non-negative integer powers")
        out = ConstantEstimate.exact(1.0)
        for _ in range(k):
            out = out * self
        return out

    def exp(self):
        v = math.exp(self.value)
        return self._new(v, v * math.expm1(self.error_bound))

    def log(self):
        if self.lo <= 0:
            raise UsageError("log of an interval reaching 0")
        v = math.log(self.value)
        return self._new(v, -math.log1p(-self.error_bound / self.value))

    def as_row(self, digits=12):
        return {
            "name": self.name,
            "value": f"{self.value:.{digits}g}" if not self.fit_only else "fit",
            "error_bound": f"{self.error_bound:.3e}" if not self.fit_only else "fit",
            "method": self.method,
        }


GAMMA = ConstantEstimate("gamma", GAMMA_LITERAL, 1e-19, "literal")
PI = ConstantEstimate("pi", math.pi, 2 * EPS * math.pi, "literal")


# --------------------------------------------------------------------------
# zeta by Euler-Maclaurin

_WANT = {"value": 0, "first_derivative": 1, "second_derivative": 2, "third_derivative": 3}


@lru_cache(maxsize=None)
def _bernoulli_even(kmax):
    b = special.bernoulli(2 * kmax)
    return [float(b[2 * k]) for k in range(kmax + 1)]


def _deriv_polys(s, j, rmax):
    """Coefficient lists P_r (low degree first) with f^(r)(x) = x^(-s-r) P_r(log x), f = (-log x)^j x^-s."""
    polys = [[0.0] * j + [(-1.0) ** j]]
    for r in range(rmax):
        p = polys[-1]
        nxt = [-(s + r) * c for c in p]
        for i in range(1, len(p)):
            nxt[i - 1] += i * p[i]
        polys.append(nxt)
    return polys


def _horner(p, x):
    out = 0.0
    for c in reversed(p):
        out = out * x + c
    return out


def _keeps_sign_beyond(p, x):
    """True if the polynomial has no real root >= x."""
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    if len(p) <= 1:
        return True
    roots = np.roots(p[::-1])
    real = roots[np.abs(roots.imag) < 1e-9].real
    return not (len(real) and real.max() >= x - 1e-9)


_KMAX = 40


def _em_scan(s, j, N, polys, sign_ok):
    """Best Euler-Maclaurin (value, bound) over K for cutoff N."""
    n = np.arange(1, N, dtype=np.float64)
    terms = (-np.log(n)) ** j * n ** (-s)
    head = math.fsum(terms)
    lN = math.log(N)
    if s == 1:
        # finite part of the divergent integral at the pole
        integ = (-1) ** (j + 1) * lN ** (j + 1) / (j + 1)
    else:
        # integral of (-log t)^j t^-s over [N, inf), continued analytically for s < 1
        integ = (-1) ** j * N ** (1 - s) * sum(
            math.factorial(j) / math.factorial(j - i) * lN ** (j - i) / (s - 1) ** (i + 1) for i in range(j + 1)
        )
    fN = N ** (-s) * _horner(polys[0], lN)
    bern = _bernoulli_even(_KMAX)
    scale = float(np.abs(terms).sum()) + abs(integ) + abs(fN)
    corr, best = [], (None, math.inf)
    for k in range(1, _KMAX):
        r = 2 * k - 1
        corr.append(bern[k] / math.factorial(2 * k) * N ** (-s - r) * _horner(polys[r], lN))
        scale += abs(corr[-1])
        if k < 2 or not sign_ok[k](lN):
            continue
        # remainder is at most the last included correction once f^(2k) keeps its sign
        bound = abs(corr[-1]) + 16 * EPS * scale
        if bound < best[1]:
            best = (head + integ + fN / 2 - math.fsum(corr), bound)
        elif bound > 100 * best[1]:
            break
    return best


def _em_best(s, j):
    polys = _deriv_polys(s, j, 2 * _KMAX)
    sign_ok = {k: (lambda lN, p=polys[2 * k]: _keeps_sign_beyond(p, lN)) for k in range(1, _KMAX)}
    best = (None, math.inf)
    for N in (16, 32, 64, 256, 1024, 8192, 65536):
        v, b = _em_scan(s, j, N, polys, sign_ok)
        if v is not None and b < best[1]:
            best = (v, b)
        if best[0] is not None and best[1] < 1e-15 * max(1.0, abs(best[0])):
            break
    if best[0] is None:  # pragma: no cover
        raise UsageError(f"Euler-Maclaurin failed to converge at s={s}")
    return best


@lru_cache(maxsize=None)
def stieltjes(j: int) -> ConstantEstimate:
    """Stieltjes constant gamma_j (j = 0..2), the regularised sum of (log n)^j / n."""
    if j not in (0, 1, 2):
        raise UsageError("stieltjes constants are provided for j = 0..2")
    v, b = _em_best(1.0, j)
    return ConstantEstimate(f"gamma_{j}", (-1) ** j * v, b, "zeta_euler_maclaurin")


@lru_cache(maxsize=4096)
def zeta_derivative(s: float, j: int = 0) -> ConstantEstimate:
    """zeta^(j)(s) for real s > 0, s != 1, j in 0..3."""
    s = float(s)
    if s == 1.0:
        raise PoleError("zeta has a pole at s = 1")
    if s <= 0:
        raise UsageError("zeta is evaluated only for s > 0")
    if j not in (0, 1, 2, 3):
        raise UsageError("derivative order must be 0..3")
    names = ["zeta", "zeta'", "zeta''", "zeta'''"]
    if s >= 12:
        # plain Dirichlet series; tail is tiny and bounded directly
        n = np.arange(1, 65, dtype=np.float64)
        vals = (-np.log(n)) ** j * n ** (-s)
        tail = _log_power_tail(j, s, 65)
        return ConstantEstimate(
            f"{names[j]}({s:g})", math.fsum(vals), tail + 8 * EPS * float(np.abs(vals).sum()), "zeta_euler_maclaurin"
        )
    v, b = _em_best(s, j)
    return ConstantEstimate(f"{names[j]}({s:g})", v, b, "zeta_euler_maclaurin")


def zeta(s: float, want="value") -> ConstantEstimate:
    """zeta(s), zeta'(s) or zeta''(s); want is a name or an order 0..3."""
    j = want if isinstance(want, int) else _WANT.get(want)
    if j is None:
        raise UsageError(f"want must be one of {sorted(_WANT)}")
    s = float(s)
    if j > 0 and s <= 1:
        raise UsageError("derivatives are provided for s > 1 only")
    return zeta_derivative(s, j)


def _log_zeta_derivs(sigma):
    z = [zeta_derivative(sigma, j) for j in range(4)]
    l1 = z[1] / z[0]
    l2 = z[2] / z[0] - l1 * l1
    l3 = z[3] / z[0] - 3 * (z[2] * z[1]) / (z[0] * z[0]) + 2 * l1 ** 3
    return [z[0].log(), l1, l2, l3]


# --------------------------------------------------------------------------
# prime zeta with Q-acceleration


@lru_cache(maxsize=None)
def _small_primes(q):
    return sieve.sieve_primes(q).astype(np.float64)


def _mobius(m):
    out, k = 1, m
    p = 2
    while p * p <= k:
        if k % p == 0:
            k //= p
            if k % p == 0:
                return 0
            out = -out
        p += 1
    return -out if k > 1 else out


def _log_power_tail(j, sigma, a):
    """Upper bound for sum over integers n >= a of (log n)^j n^-sigma."""
    la = math.log(a)
    if la < j / sigma:
        raise UsageError("log-power tail requested outside its decreasing range")
    first = la**j * a ** (-sigma)
    integ = special.gammaincc(j + 1, (sigma - 1) * la) * special.gamma(j + 1) / (sigma - 1) ** (j + 1)
    return _QUAD_SAFETY * (first + integ)


def _local_euler_deriv(sigma, j, q=Q_CUT):
    """sum over p <= q of d^j/dsigma^j log(1 - p^-sigma), with a rounding allowance."""
    ps = _small_primes(q)
    lp = np.log(ps)
    u = ps ** (-sigma)
    if j == 0:
        vals = np.log1p(-u)
    elif j == 1:
        vals = lp * u / (1 - u)
    elif j == 2:
        vals = -(lp**2) * u / (1 - u) ** 2
    else:
        vals = lp**3 * u * (1 + u) / (1 - u) ** 3
    return math.fsum(vals), 16 * EPS * float(np.abs(vals).sum())


@lru_cache(maxsize=None)
def prime_zeta_tail(s: float, j: int = 0, q: int = Q_CUT) -> ConstantEstimate:
    """d^j/ds^j of sum over primes p > q of p^-s, for s >= 2."""
    if s < 2:
        raise UsageError("accelerated prime zeta needs s >= 2")
    total = ConstantEstimate.exact(0.0)
    m = 1
    while True:
        bound_m = m ** (j - 1) * _log_power_tail(j, m * s, q + 1)
        if bound_m < 1e-22 and m > 1:
            nxt = (m + 1) ** (j - 1) * _log_power_tail(j, (m + 1) * s, q + 1)
            tail = 2 * bound_m if nxt <= bound_m / 2 else math.inf
            if math.isfinite(tail):
                total = total + ConstantEstimate("t", 0.0, tail, "composite")
                break
        mu = _mobius(m)
        if mu:
            sig = m * s
            lz = _log_zeta_derivs(sig)[j]
            loc, loc_err = _local_euler_deriv(sig, j, q)
            term = (lz + ConstantEstimate("loc", loc, loc_err, "composite")) * float(mu * m ** (j - 1))
            total = total + term
        m += 1
    return total.named(f"P_{q}^({j})({s:g})", "prime_sum_accelerated")


def prime_zeta(s: float, j: int = 0) -> ConstantEstimate:
    """P^(j)(s) where P(s) = sum over primes of p^-s."""
    ps = _small_primes(Q_CUT)
    vals = (-np.log(ps)) ** j * ps ** (-s)
    head = ConstantEstimate("head", math.fsum(vals), 8 * EPS * float(np.abs(vals).sum()), "composite")
    return (head + prime_zeta_tail(float(s), j)).named(f"P^({j})({s:g})", "prime_sum_accelerated")


# --------------------------------------------------------------------------
# prime sums: weights, majorants and the two routes

# weight(p) as a vectorised function, and the expansion used by the accelerated route:
# a generator of (coef, j, sigma) with weight(p) = sum coef * (log p)^j * p^-sigma


def _w_c1(p):
    return np.log1p(-1.0 / (p + 1.0) ** 2)


_WEIGHTS = {
    "inv_p2": lambda p: p**-2.0,
    "inv_p2m1": lambda p: 1.0 / (p * p - 1.0),
    "logp_over_p2m1": lambda p: np.log(p) / (p * p - 1.0),
    "logp_over_p2": lambda p: np.log(p) / p**2,
    "log2p_over_p2": lambda p: np.log(p) ** 2 / p**2,
    "p2logp_over_p2m1_sq": lambda p: p * p * np.log(p) / (p * p - 1.0) ** 2,
    "mertens_summand": lambda p: np.log1p(-1.0 / p) + 1.0 / p,
    "komega_summand": lambda p: np.log1p(-1.0 / p) + 1.0 / p,
    "kbigomega_summand": lambda p: np.log1p(-1.0 / p) + 1.0 / (p - 1.0),
    "c1_log_factor": _w_c1,
}
WEIGHT_NAMES = tuple(_WEIGHTS)


def _majorant(weight, x):
    """(c, a, sigma, sign) with sign*weight(p) <= c (log p)^a p^-sigma for every p > x."""
    r = x * x / (x * x - 1.0)
    table = {
        "inv_p2": (1.0, 0, 2.0, 1),
        "inv_p2m1": (r, 0, 2.0, 1),
        "logp_over_p2m1": (r, 1, 2.0, 1),
        "logp_over_p2": (1.0, 1, 2.0, 1),
        "log2p_over_p2": (1.0, 2, 2.0, 1),
        "p2logp_over_p2m1_sq": (r * r, 1, 2.0, 1),
        "mertens_summand": (0.5 / (1 - 1 / x), 0, 2.0, -1),
        "komega_summand": (0.5 / (1 - 1 / x), 0, 2.0, -1),
        "kbigomega_summand": (1.0 / (1 - 1 / x), 0, 2.0, 1),
        "c1_log_factor": (1.0 / (1 - 1 / (x + 1) ** 2), 0, 2.0, -1),
    }
    return table[weight]


def partial_summation_tail(U, k, s, x):
    """Upper bound for sum_{n > x} a_n (log n)^k n^-s given 0 <= sum_{n<=t} a_n <= U(t) for t >= x.

    Uses sum_{n>x} a_n w(n) <= int_x^inf U(t) (-w'(t)) dt, valid while w is
    non-increasing on [x, inf); the integral is done in u = log t.
    """
    lx = math.log(x)
    if s * lx < k:
        raise UsageError("weight is not decreasing on the tail")

    def integrand(u):
        # -w'(t) dt = e^{-su} (s u^k - k u^{k-1}) du
        slope = s * u**k - (k * u ** (k - 1) if k else 0.0)
        return U(math.exp(u)) * math.exp(-s * u) * slope

    # beyond u = 340 every majorant used here is below e^{-(s-2)u} u^3 with s > 2,
    # or e^{-u} u^3 for s = 2; both integrate to far less than the allowance
    val, err = 0.0, 0.0
    edges = [lx, lx + 5.0, lx + 60.0, max(_U_MAX, lx + 61.0)]
    for a, b in zip(edges, edges[1:]):
        with warnings.catch_warnings():
            # roundoff notices near the far end are covered by the safety factor
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            v, e = integrate.quad(integrand, a, b, limit=400, epsabs=0.0, epsrel=1e-10)
        val, err = val + v, err + abs(e)
    return _QUAD_SAFETY * val + 2 * err + 1e-100


def _pi_majorant(t):
    return 1.3 * t / math.log(t)


def _prime_tail(c, a, sigma, x):
    if x < 17:
        raise UsageError("prime tails need x >= 17")
    return c * partial_summation_tail(_pi_majorant, a, sigma, x)


def prime_sum(weight: str, p_max: int = DEFAULT_P_MAX) -> ConstantEstimate:
    """Sum of weight(p) over all primes: direct to p_max plus a rigorous tail bound."""
    if weight not in _WEIGHTS:
        raise UsageError(f"unknown weight {weight!r}; choose from {', '.join(WEIGHT_NAMES)}")
    p_max = int(p_max)
    if p_max < 1000:
        raise UsageError("p_max must be >= 1000")
    return _prime_sum_cached(weight, p_max)


@lru_cache(maxsize=64)
def _prime_sum_cached(weight, p_max):
    ps = sieve.primes_upto(p_max).astype(np.float64)
    vals = _WEIGHTS[weight](ps)
    partial = float(np.sum(vals))
    rounding = (math.log2(len(vals)) + 4) * EPS * float(np.abs(vals).sum())
    c, a, sigma, sign = _majorant(weight, float(p_max))
    tail = _prime_tail(c, a, sigma, float(p_max))
    # the tail has a known sign, so centre the interval on it
    return ConstantEstimate(
        f"sum_p {weight}", partial + sign * tail / 2, tail / 2 + rounding, "prime_sum_direct"
    )


def _expansion(weight):
    """Yield (coef, j, sigma) with weight(p) = sum coef (log p)^j p^-sigma (p > Q)."""
    if weight == "inv_p2":
        yield (1.0, 0, 2.0)
    elif weight == "logp_over_p2":
        yield (1.0, 1, 2.0)
    elif weight == "log2p_over_p2":
        yield (1.0, 2, 2.0)
    elif weight == "inv_p2m1":
        for v in range(1, 200):
            yield (1.0, 0, 2.0 * v)
    elif weight == "logp_over_p2m1":
        for v in range(1, 200):
            yield (1.0, 1, 2.0 * v)
    elif weight == "p2logp_over_p2m1_sq":
        for v in range(1, 200):
            yield (float(v), 1, 2.0 * v)
    elif weight in ("mertens_summand", "komega_summand"):
        for k in range(2, 200):
            yield (-1.0 / k, 0, float(k))
    elif weight == "kbigomega_summand":
        for k in range(2, 200):
            yield (1.0 - 1.0 / k, 0, float(k))
    elif weight == "c1_log_factor":
        for k in range(2, 200):
            yield ((-1.0) ** (k + 1) * (2.0**k - 2.0) / k, 0, float(k))
    else:  # pragma: no cover
        raise UsageError(f"no expansion for {weight}")


def _accelerate_expansion(terms, head_vals, name):
    """sum over p <= Q of head_vals plus the p > Q part of a prime-zeta expansion."""
    head = ConstantEstimate("head", math.fsum(head_vals), 8 * EPS * float(np.abs(head_vals).sum()), "composite")
    total = head
    terms = list(terms)
    for i, (coef, j, sigma) in enumerate(terms):
        size = abs(coef) * _log_power_tail(j, sigma, Q_CUT + 1)
        if size < 1e-20:
            # remaining terms shrink at least geometrically with ratio <= 1/2
            if i + 1 < len(terms):
                c2, j2, s2 = terms[i + 1]
                nxt = abs(c2) * _log_power_tail(j2, s2, Q_CUT + 1)
                if nxt > size / 2:
                    raise UsageError("expansion does not decay fast enough")
            total = total + ConstantEstimate("t", 0.0, 2 * size, "composite")
            break
        total = total + prime_zeta_tail(sigma, j) * (coef * (-1.0) ** j)
    else:
        if len(terms) >= 100:  # pragma: no cover
            raise UsageError("expansion not converged")
    return total.named(name, "prime_sum_accelerated")


# names accepted by prime_sum_accelerated and the weight/route behind each
_ACCEL = {
    "C_log": "zeta",
    "C_omega": "inv_p2",
    "C_Omega": "inv_p2m1",
    "C_logkappa": "logp_over_p2",
    "sum_log2p_over_p2": "log2p_over_p2",
    "sum_p2logp_over_p2m1_sq": "p2logp_over_p2m1_sq",
    "mertens_sum": "mertens_summand",
    "komega_sum": "komega_summand",
    "kbigomega_sum": "kbigomega_summand",
    "c1_log_product": "c1_log_factor",
}
_ACCEL.update({w: w for w in WEIGHT_NAMES})


@lru_cache(maxsize=None)
def prime_sum_accelerated(name: str) -> ConstantEstimate:
    """High-precision value of a named prime sum (weight name or constant alias)."""
    route = _ACCEL.get(name)
    if route is None:
        raise UsageError(f"no acceleration known for {name!r}")
    if route == "zeta":
        est = -zeta(2.0, 1) / zeta(2.0, 0)
        return est.named(name, "zeta_euler_maclaurin")
    ps = _small_primes(Q_CUT)
    return _accelerate_expansion(_expansion(route), _WEIGHTS[route](ps), name)


def direct_for(name: str, p_max: int = DEFAULT_P_MAX) -> ConstantEstimate:
    """Direct prime-sum counterpart of an accelerated name."""
    route = _ACCEL.get(name)
    if route is None:
        raise UsageError(f"unknown constant {name!r}")
    w = "logp_over_p2m1" if route == "zeta" else route
    return prime_sum(w, p_max).named(name, "prime_sum_direct")


# --------------------------------------------------------------------------
# H_S(p), K_S(p) and the f_{S,eta} constants


def hs_ks(p, S: sieve.SetS):
    """(H_S(p), K_S(p)) = (sum over nu in S of p^-2nu, sum of nu p^-2nu)."""
    if isinstance(S, str):
        S = sieve.SetS.parse(S)
    p = float(p)
    if p < 2:
        raise UsageError("p must be a prime >= 2")
    q = p**-2
    if S.is_natural:
        return 1.0 / (p * p - 1.0), p * p / (p * p - 1.0) ** 2
    H = math.fsum(q**e for e in S.explicit)
    K = math.fsum(e * q**e for e in S.explicit)
    t = S.cofinite_from
    if t is not None:
        H += q**t / (1.0 - q)
        K += q**t * (t - (t - 1) * q) / (1.0 - q) ** 2
    return H, K


def _hs_ks_arrays(ps, S: sieve.SetS):
    q = ps**-2.0
    if S.is_natural:
        return 1.0 / (ps * ps - 1.0), ps * ps / (ps * ps - 1.0) ** 2
    H = np.zeros_like(ps)
    K = np.zeros_like(ps)
    for e in S.explicit:
        H += q**e
        K += e * q**e
    t = S.cofinite_from
    if t is not None:
        H += q**t / (1.0 - q)
        K += q**t * (t - (t - 1) * q) / (1.0 - q) ** 2
    return H, K


def _seta_sums_direct(S, eta, p_max):
    """(sum_p (log p)^eta H_S(p), sum_p (log p)^(eta+1) K_S(p)) by direct summation."""
    ps = sieve.primes_upto(p_max).astype(np.float64)
    H, K = _hs_ks_arrays(ps, S)
    lp = np.log(ps)
    out = []
    x = float(p_max)
    r = x * x / (x * x - 1.0)
    for vals, a, c in ((lp**eta * H, eta, r), (lp ** (eta + 1) * K, eta + 1, r * r)):
        partial = float(np.sum(vals))
        rounding = (math.log2(len(vals)) + 4) * EPS * float(np.abs(vals).sum())
        tail = _prime_tail(c, a, 2.0, x)
        out.append(ConstantEstimate("s", partial + tail / 2, tail / 2 + rounding, "prime_sum_direct"))
    return out


def _seta_expansion(S, j, weight_nu):
    """(coef, j, 2 nu) over nu in S, truncated generously; weight_nu gives coef(nu)."""
    nus = list(S.explicit)
    if S.cofinite_from is not None:
        nus += list(range(S.cofinite_from, S.cofinite_from + 200))
    for nu in sorted(nus):
        yield (weight_nu(nu), j, 2.0 * nu)


def _seta_sums_accelerated(S, eta):
    if eta != int(eta) or eta > 2:
        raise UsageError("accelerated f_{S,eta} constants need integer eta in 0..2")
    eta = int(eta)
    ps = _small_primes(Q_CUT)
    H, K = _hs_ks_arrays(ps, S)
    lp = np.log(ps)
    a = _accelerate_expansion(_seta_expansion(S, eta, lambda nu: 1.0), lp**eta * H, "A")
    b = _accelerate_expansion(_seta_expansion(S, eta + 1, lambda nu: float(nu)), lp ** (eta + 1) * K, "B")
    return a, b


def seta_constants(S, eta, method="accelerated", p_max=DEFAULT_P_MAX):
    """(C_f, D_f) for f_{S,eta} from the prime-power route."""
    if isinstance(S, str):
        S = sieve.SetS.parse(S)
    if method == "accelerated":
        A, B = _seta_sums_accelerated(S, eta)
        tag = "prime_sum_accelerated"
    elif method == "direct":
        A, B = _seta_sums_direct(S, eta, p_max)
        tag = "prime_sum_direct"
    else:
        raise UsageError("method must be 'accelerated' or 'direct'")
    C = A.named("C_f", tag)
    D = ((2 * GAMMA - 1) * A - 2 * B).named("D_f", tag)
    return C, D


# --------------------------------------------------------------------------
# series over integers (the generic route)


def summatory_majorant(spec: sieve.FunctionSpec):
    """U with 0 <= sum_{n<=t} |f(n)| <= U(t) for t >= 3, or None if only a pointwise bound exists."""
    fam = spec.family
    F = sieve.Family
    mertens_b = 0.2615  # sum_{p<=t} 1/p < log log t + B + 1/log^2 t for t > 1
    prime_power_extra = 0.7732  # sum_p 1/(p(p-1)) rounded up
    if fam is F.ID:
        return lambda t: t * t
    if fam is F.RECIPROCAL:
        return lambda t: math.log(t) + 1.0
    if fam is F.TAU:
        return lambda t: t * (math.log(t) + 1.0)
    if fam in (F.LOG, F.LOG_KAPPA):
        return lambda t: t * math.log(t)
    if fam is F.OMEGA:
        return lambda t: t * (math.log(math.log(t)) + mertens_b + 1.0 / math.log(t) ** 2)
    if fam is F.BIG_OMEGA:
        return lambda t: t * (math.log(math.log(t)) + mertens_b + prime_power_extra + 1.0 / math.log(t) ** 2)
    if fam is F.GENERAL_S_ETA:
        eta = spec.eta
        return lambda t: t * math.log(t) ** eta * (
            math.log(math.log(t)) + mertens_b + prime_power_extra + 1.0 / math.log(t) ** 2
        )
    return None


def pointwise_majorant(spec: sieve.FunctionSpec):
    """B(t) >= max_{n <= t} |f(n)|, non-decreasing in t."""
    fam = spec.family
    F = sieve.Family
    if fam is F.ID:
        return lambda t: t
    if fam is F.RECIPROCAL:
        return lambda t: 1.0
    if fam is F.TAU:
        return lambda t: 2.0 * math.sqrt(t)
    if fam in (F.LOG, F.LOG_KAPPA):
        return lambda t: math.log(max(t, 1.0))
    if fam in (F.OMEGA, F.BIG_OMEGA):
        return lambda t: math.log(max(t, 1.0)) / math.log(2)
    if fam is F.GENERAL_S_ETA:
        eta = spec.eta
        return lambda t: math.log(max(t, 2.0)) ** (eta + 1) / math.log(2)
    b, d = spec.beta, spec.delta

    def bound(t):
        best = 1.0 if d == 0 else 0.0
        if t < 2:
            return best
        lo, hi = math.log(2), math.log(t)
        cands = [lo, hi]
        if b != 0 and -d / b > 0:
            cands.append(min(max(-d / b, lo), hi))
        for u in cands:
            best = max(best, math.exp(b * u) * u**d)
        return best

    return bound


def series_direct(spec: sieve.FunctionSpec, kind="plain", n_terms=DEFAULT_SERIES_TERMS) -> ConstantEstimate:
    """sum over n of f(n)/n^2 (plain) or f(n) log n / n^2 (log_weighted), with a tail bound."""
    beta, delta = spec.growth
    if beta >= 1:
        raise UsageError(f"{spec}: series diverges (beta={beta} >= 1)")
    if kind not in ("plain", "log_weighted"):
        raise UsageError("kind must be 'plain' or 'log_weighted'")
    n_terms = int(n_terms)
    if n_terms < 100:
        raise UsageError("n_terms must be >= 100")
    return _series_cached(spec, kind, n_terms)


@lru_cache(maxsize=64)
def _series_cached(spec, kind, n_terms):
    f = sieve.default_store().f(spec, n_terms).values[: n_terms + 1].astype(np.float64)
    n = np.arange(n_terms + 1, dtype=np.float64)
    n[0] = 1.0
    k = 0 if kind == "plain" else 1
    w = n**-2.0 if k == 0 else np.log(n) / n**2
    vals = f[1:] * w[1:]
    partial = float(np.sum(vals))
    absum = float(np.abs(vals).sum())
    rounding = (math.log2(n_terms) + 6) * EPS * absum
    if absum == 0.0 and not np.any(f):
        return ConstantEstimate(f"series {kind} {spec}", 0.0, 0.0, "series_direct")
    U = summatory_majorant(spec)
    x = float(n_terms)
    if U is not None:
        tail = partial_summation_tail(U, k, 2.0, x)
    else:
        B = pointwise_majorant(spec)
        # f(n) w(n) <= B(n) (log n)^k n^-2 <= n^(beta-2) (log n)^(delta+k) * const; integrate pointwise
        g = lambda t: B(t) * math.log(t) ** k * t**-2.0
        val, err = integrate.quad(g, x, math.inf, limit=200)
        tail = _QUAD_SAFETY * (val + g(x + 1.0)) + 2 * abs(err)
    # every family here has f >= 0, so the tail only adds
    return ConstantEstimate(f"series {kind} {spec}", partial + tail / 2, tail / 2 + rounding, "series_direct")


def generic_constants(spec: sieve.FunctionSpec, n_terms=DEFAULT_SERIES_TERMS):
    """(C_f, D_f) from the integer-series route, valid for every f with beta < 1."""
    z2 = zeta(2.0)
    C = 2 * GAMMA - 1 - 2 * zeta(2.0, 1) / z2
    s1 = series_direct(spec, "plain", n_terms)
    s2 = series_direct(spec, "log_weighted", n_terms)
    Cf = (s1 / z2).named("C_f", "series_direct")
    Df = ((C * s1 - 2 * s2) / z2).named("D_f", "series_direct")
    return Cf, Df


# --------------------------------------------------------------------------
# named constants


@lru_cache(maxsize=None)
def named_constant(name: str) -> ConstantEstimate:
    """Composite constants used across formulas, each from its high-precision route."""
    z2, z3 = zeta(2.0), zeta(3.0)
    zp2, zp3, zpp2 = zeta(2.0, 1), zeta(3.0, 1), zeta(2.0, 2)
    acc = prime_sum_accelerated
    if name == "gamma":
        return GAMMA
    if name == "C_log":
        return acc("C_log")
    if name == "D_log":
        # the displayed product form, kept verbatim
        c = -zp2 / z2
        return (c * (2 * GAMMA - 1 - 2 * zp2 / z2 + 2 * zpp2 / zp2)).named(name)
    if name == "C_logkappa":
        return acc("C_logkappa")
    if name == "D_logkappa":
        return ((2 * GAMMA - 1) * acc("logp_over_p2") - 2 * acc("log2p_over_p2")).named(name)
    if name == "C_omega":
        return acc("C_omega")
    if name == "D_omega":
        return ((2 * GAMMA - 1) * acc("inv_p2") - 2 * acc("logp_over_p2")).named(name)
    if name == "C_Omega":
        return acc("C_Omega")
    if name == "D_Omega":
        return ((2 * GAMMA - 1) * acc("inv_p2m1") - 2 * acc("p2logp_over_p2m1_sq")).named(name)
    if name == "M":
        return (GAMMA + acc("mertens_summand")).named(name)
    if name == "K_omega":
        return (2 * (GAMMA - 1 + acc("komega_summand"))).named(name)
    if name == "K_Omega":
        return (2 * (GAMMA - 1 + acc("kbigomega_summand"))).named(name)
    if name == "C1_tau_lcm":
        return (acc("c1_log_factor").exp() / PI**2).named(name, "euler_product")
    if name == "C_divisor":
        # 2 gamma - 1 - 2 zeta'(2)/zeta(2)
        return (2 * GAMMA - 1 - 2 * zp2 / z2).named(name)
    if name == "D_recip":
        return (2 * GAMMA - 1 - 2 * zp2 / z2 + 2 * zp3 / z3).named(name)
    if name == "E_lcm":
        return (2 * GAMMA - 0.5 - 2 * zp2 / z2 + 2 * zp3 / z3).named(name)
    raise UsageError(f"unknown constant {name!r}")


PUBLISHED_DECIMALS = {
    "C_log": 0.569960,
    "C_logkappa": 0.493091,
    "C_omega": 0.452247,
    "C_Omega": 0.551693,
    "M": 0.261497,
    "C1_tau_lcm": 0.078613,
}


def direct_counterpart(name: str, p_max: int = DEFAULT_P_MAX) -> ConstantEstimate:
    """The same constant through direct prime sums (for cross-method checks)."""
    if name in ("C_log", "C_logkappa", "C_omega", "C_Omega"):
        return direct_for(name, p_max)
    if name == "M":
        return (GAMMA + prime_sum("mertens_summand", p_max)).named(name, "prime_sum_direct")
    if name == "K_omega":
        return (2 * (GAMMA - 1 + prime_sum("komega_summand", p_max))).named(name, "prime_sum_direct")
    if name == "K_Omega":
        return (2 * (GAMMA - 1 + prime_sum("kbigomega_summand", p_max))).named(name, "prime_sum_direct")
    if name == "C1_tau_lcm":
        return (prime_sum("c1_log_factor", p_max).exp() / PI**2).named(name, "prime_sum_direct")
    if name == "D_log":
        # D_f from the generic integer-series route with f = log
        return generic_constants(sieve.FunctionSpec.log())[1].named(name, "series_direct")
    raise UsageError(f"no direct route for {name!r}")


def formula_constants(formula, spec: sieve.FunctionSpec | None = None) -> dict:
    """Ordered mapping key -> ConstantEstimate for every coefficient in a formula's main term."""
    formula = parse_formula(formula)
    z2, z3 = zeta(2.0), zeta(3.0)
    zp2 = zeta(2.0, 1)
    nc = named_constant
    F = FormulaId
    fit = ConstantEstimate.fit_placeholder
    if formula is F.RECT_GCD:
        sub = 2 * GAMMA - 0.5 - z2 / 2 - zp2 / z2
        return {"x2_log": 1 / z2, "x2": sub / z2}
    if formula is F.HYP_GCD_ID:
        return {"x_log2": 1 / (4 * z2), "c1": fit("c1"), "c2": fit("c2")}
    if formula is F.RECT_LCM:
        return {"x4": z3 / (4 * z2)}
    if formula is F.RECT_RATIO:
        return {"x": ConstantEstimate.exact(3.0)}
    if formula is F.TAU_GCD:
        return {"x_log": z2, "x": z2 * (2 * GAMMA - 1 + 2 * zp2 / z2), "sqrt": zeta(0.5) ** 2}
    if formula in (F.GENERIC_GCD, F.FSETA_GCD):
        if spec is None:
            raise UsageError(f"{formula.value} needs a function spec")
        if formula is F.FSETA_GCD:
            seta = spec.as_s_eta()
            if seta is None:
                raise UsageError(f"{spec} is not of the f_(S,eta) form")
            try:
                C, D = seta_constants(seta.S, seta.eta, "accelerated")
            except UsageError:
                C, D = seta_constants(seta.S, seta.eta, "direct")
        else:
            C, D = generic_constants(spec)
        return {"x_log": C, "x": D}
    if formula is F.RECIP_GCD:
        lead = z3 / z2
        return {"x_log": lead, "x": lead * nc("D_recip")}
    if formula is F.LOG_GCD:
        return {"x_log": nc("C_log"), "x": nc("D_log")}
    if formula is F.LOGKAPPA_GCD:
        return {"x_log": nc("C_logkappa"), "x": nc("D_logkappa")}
    if formula is F.OMEGA_GCD:
        return {"x_log": nc("C_omega"), "x": nc("D_omega")}
    if formula is F.BIGOMEGA_GCD:
        return {"x_log": nc("C_Omega"), "x": nc("D_Omega")}
    if formula is F.LCM_HYP:
        lead = z3 / (2 * z2)
        return {"x2_log": lead, "x2": lead * nc("E_lcm")}
    if formula is F.LOG_LCM:
        return {
            "x_log2": ConstantEstimate.exact(1.0),
            "x_log": 2 * GAMMA - 2 - nc("C_log"),
            "x": -(2 * GAMMA - 2 + nc("D_log")),
        }
    if formula is F.OMEGA_LCM:
        return {"x_log_loglog": ConstantEstimate.exact(2.0), "x_log": nc("K_omega") - nc("C_omega")}
    if formula is F.BIGOMEGA_LCM:
        return {"x_log_loglog": ConstantEstimate.exact(2.0), "x_log": nc("K_Omega") - nc("C_Omega")}
    if formula is F.TAU_LCM:
        return {"x_log3": nc("C1_tau_lcm"), "C2": fit("C2"), "C3": fit("C3"), "C4": fit("C4")}
    if formula is F.RATIO_HYP:
        return {"sqrt": zeta(1.5) ** 2 / z3}
    if formula is F.AUX_2OMEGA:
        return {"x_log": 1 / z2, "x": nc("C_divisor") / z2}
    if formula is F.AUX_TAU:
        return {"x_log": ConstantEstimate.exact(1.0), "x": 2 * GAMMA - 1}
    if formula is F.AUX_JORDAN2:
        return {"x3": 1 / (3 * z3)}
    if formula is F.AUX_OMEGA:
        return {"x_loglog": ConstantEstimate.exact(1.0), "x": nc("M")}
    if formula is F.AUX_TAU_LOG:
        return {"x_log2": ConstantEstimate.exact(1.0), "x_log": 2 * GAMMA - 2, "x": 2 - 2 * GAMMA}
    if formula is F.AUX_TAU2:
        return {"x_log3": 1 / PI**2, "b": fit("b"), "c": fit("c"), "d": fit("d")}
    raise UsageError(f"no constants for {formula}")  # pragma: no cover


def derived_counterparts(formula) -> dict:
    """Closed-form values for coefficients that the main-term model otherwise fits.

    Only the gcd-of-Id sum is covered: its Dirichlet series is
    zeta(s)^2 zeta(2s-1) / zeta(2s), and c1, c2 follow from the Laurent
    expansion at s = 1 using zeta(2), zeta'(2), zeta''(2) and the Stieltjes
    constants. These serve as an independent check on the fitted values.
    """
    formula = parse_formula(formula)
    if formula is not FormulaId.HYP_GCD_ID:
        return {}
    z2, zp, zpp = zeta(2.0), zeta(2.0, 1), zeta(2.0, 2)
    g0, g1 = stieltjes(0), stieltjes(1)
    a0 = 1 / z2
    a1 = -2 * zp / z2**2
    a2 = -2 * zpp / z2**2 + 4 * zp**2 / z2**3
    b1 = 2 * g0 * a0 + a1 / 2
    b2 = (2.5 * g0**2 - 3 * g1) * a0 + 2 * g0 * a1 + a2 / 2
    return {
        "c1": (b1 - a0 / 2).named("hyp_gcd_id.c1"),
        "c2": (a0 / 2 - b1 + b2).named("hyp_gcd_id.c2"),
    }


def coefficient_estimates(formula, spec=None) -> list:
    """Every main-term coefficient of a formula, namespaced by formula tag.

    Coefficients that cannot be derived are returned with ``fit_only=True``
    and a NaN value; :mod:`hypsum.verify` fits them.
    """
    formula = parse_formula(formula)
    out = []
    for key, est in formula_constants(formula, spec).items():
        out.append(replace(est, name=f"{formula.value}.{key}"))
    return out

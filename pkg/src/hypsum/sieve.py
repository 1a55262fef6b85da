"""Sieved tables of arithmetic functions on 1..N and Dirichlet convolution.

Every table is a :class:`ValueTable` wrapping a read-only numpy array of
length ``n_max + 1`` whose slot 0 is unused. Multiplicative and additive
functions are produced from their prime-power values by the linear sieve
of the compiled backend, or by the segmented numpy factor sieve once
``n_max`` exceeds :data:`SEGMENT_THRESHOLD`.
"""

from __future__ import annotations

import enum
import math
import os
import struct
import threading
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np

from . import kernels
from .errors import HypsumError, ResourceError, UsageError

INT = "int"
FLOAT = "float"

#: tables above this size are built segment by segment
SEGMENT_THRESHOLD = 30_000_000
SEGMENT_LENGTH = 4_000_000
#: rough cap on bytes a single sieve request may allocate
MEMORY_BUDGET = 3 * 2**30

_I64_MAX = 2**63 - 1

MAGIC = b"HSVT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQB")


class TableOverflowError(HypsumError, OverflowError):
    """An integer table would exceed signed 64-bit range."""

    exit_code = 2


def configure(memory_budget=None, segment_threshold=None, segment_length=None):
    """Adjust module-wide sieve limits."""
    global MEMORY_BUDGET, SEGMENT_THRESHOLD, SEGMENT_LENGTH
    if memory_budget is not None:
        MEMORY_BUDGET = int(memory_budget)
    if segment_threshold is not None:
        SEGMENT_THRESHOLD = int(segment_threshold)
    if segment_length is not None:
        SEGMENT_LENGTH = int(segment_length)


def _check_budget(n_max, bytes_per_entry):
    need = (n_max + 1) * bytes_per_entry
    if need > MEMORY_BUDGET:
        raise ResourceError(
            f"n_max={n_max} needs ~{need / 2**20:.0f} MiB, budget is {MEMORY_BUDGET / 2**20:.0f} MiB"
        )


# --------------------------------------------------------------------------
# ValueTable


@dataclass(frozen=True, eq=False)
class ValueTable:
    """Values of one arithmetic function on 1..n_max."""

    name: str
    values: np.ndarray
    kind: str = INT

    def __post_init__(self):
        if self.kind not in (INT, FLOAT):
            raise UsageError(f"kind must be {INT!r} or {FLOAT!r}")
        want = np.int64 if self.kind == INT else np.float64
        if self.values.dtype != want:
            raise UsageError(f"{self.kind} table needs dtype {np.dtype(want)}, got {self.values.dtype}")
        if self.values.ndim != 1 or len(self.values) < 2:
            raise UsageError("values must be 1-d with at least slots 0 and 1")
        self.values.flags.writeable = False

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return self.n_max

    @cached_property
    def prefix(self) -> np.ndarray:
        """prefix[y] = sum of values[1..y]; exact for int tables, compensated for float."""
        if self.kind == INT:
            if float(np.abs(self.values).sum(dtype=np.float64)) >= 0.99 * _I64_MAX:
                raise TableOverflowError(f"prefix sums of {self.name} overflow int64")
            out = np.cumsum(self.values)
        else:
            out = kernels.compensated_cumsum(self.values)
        out.flags.writeable = False
        return out

    def summatory(self, x) -> int | float:
        y = int(math.floor(x))
        if y > self.n_max:
            raise ResourceError(f"x={x} beyond table {self.name} (n_max={self.n_max})")
        if y < 1:
            return 0 if self.kind == INT else 0.0
        v = self.prefix[y]
        return int(v) if self.kind == INT else float(v)

    def truncated(self, n_max) -> ValueTable:
        if n_max > self.n_max:
            raise ResourceError(f"cannot extend {self.name} from {self.n_max} to {n_max}")
        return ValueTable(self.name, self.values[: n_max + 1].copy(), self.kind)

    def dump(self, path) -> None:
        code = 0 if self.kind == INT else 1
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, self.n_max, code))
            fh.write(self.values[1:].astype("<i8" if code == 0 else "<f8").tobytes())

    @classmethod
    def load(cls, path, name=None) -> ValueTable:
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
            if len(head) != _HEADER.size:
                raise UsageError(f"{path}: truncated header")
            magic, version, n_max, code = _HEADER.unpack(head)
            if magic != MAGIC:
                raise UsageError(f"{path}: bad magic {magic!r}")
            if version != FORMAT_VERSION:
                raise UsageError(f"{path}: unsupported version {version}")
            if code not in (0, 1):
                raise UsageError(f"{path}: bad kind byte {code}")
            raw = np.frombuffer(fh.read(), dtype="<i8" if code == 0 else "<f8")
        if len(raw) != n_max:
            raise UsageError(f"{path}: expected {n_max} values, found {len(raw)}")
        vals = np.zeros(n_max + 1, dtype=np.int64 if code == 0 else np.float64)
        vals[1:] = raw
        return cls(name or Path(path).stem, vals, INT if code == 0 else FLOAT)


def from_array(name, values, kind=None) -> ValueTable:
    values = np.asarray(values)
    if kind is None:
        kind = FLOAT if values.dtype.kind == "f" else INT
    if kind == INT:
        if values.dtype.kind == "f":
            raise UsageError("refusing to store floating values in an int table")
        values = values.astype(np.int64)
    else:
        values = values.astype(np.float64)
    return ValueTable(name, values, kind)


# --------------------------------------------------------------------------
# Sets S and function descriptors


@dataclass(frozen=True)
class SetS:
    """A set of positive integers containing 1: finite part plus optional tail {t, t+1, ...}."""

    explicit: tuple = (1,)
    cofinite_from: int | None = None

    def __post_init__(self):
        ex = tuple(sorted({int(v) for v in self.explicit}))
        if any(v < 1 for v in ex):
            raise UsageError("members of S must be positive integers")
        t = self.cofinite_from
        if t is not None:
            t = int(t)
            if t < 1:
                raise UsageError("cofinite_from must be >= 1")
            if any(v >= t for v in ex):
                raise UsageError(f"explicit members {ex} duplicate the tail from {t}")
        object.__setattr__(self, "explicit", ex)
        object.__setattr__(self, "cofinite_from", t)
        if 1 not in self:
            raise UsageError("S must contain 1")

    @classmethod
    def natural(cls) -> SetS:
        return cls((), 1)

    @classmethod
    def singleton(cls) -> SetS:
        return cls((1,))

    @classmethod
    def parse(cls, text: str) -> SetS:
        """Parse ``"all"``, ``"1"``, or a comma list such as ``"1,3,from:5"``."""
        text = text.strip().lower()
        if text in ("all", "n", "nat"):
            return cls.natural()
        explicit, tail = [], None
        for tok in filter(None, (t.strip() for t in text.split(","))):
            if tok.startswith("from:"):
                tail = int(tok[5:])
            else:
                explicit.append(int(tok))
        if tail is not None:
            explicit = [v for v in explicit if v < tail]
        return cls(tuple(explicit), tail)

    def __contains__(self, nu) -> bool:
        nu = int(nu)
        if nu < 1:
            return False
        return nu in self.explicit or (self.cofinite_from is not None and nu >= self.cofinite_from)

    def count_upto(self, k):
        """#{nu in S : 1 <= nu <= k}, vectorised over k."""
        k = np.asarray(k, dtype=np.int64)
        out = np.zeros(k.shape, dtype=np.int64)
        for e in self.explicit:
            out += k >= e
        if self.cofinite_from is not None:
            out += np.maximum(k - self.cofinite_from + 1, 0)
        return out

    @property
    def is_natural(self) -> bool:
        return self.cofinite_from == 1

    @property
    def is_singleton(self) -> bool:
        return self.cofinite_from is None and self.explicit == (1,)

    def __str__(self):
        if self.is_natural:
            return "all"
        parts = [str(v) for v in self.explicit]
        if self.cofinite_from is not None:
            parts.append(f"from:{self.cofinite_from}")
        return ",".join(parts)


class Family(str, enum.Enum):
    ID = "id"
    RECIPROCAL = "reciprocal"
    TAU = "tau"
    LOG = "log"
    LOG_KAPPA = "log_kappa"
    OMEGA = "omega"
    BIG_OMEGA = "big_omega"
    POWER_LOG = "powerlog"
    GENERAL_S_ETA = "seta"


NONE, ADDITIVE, COMPLETELY_ADDITIVE = "none", "additive", "completely-additive"

_ADDITIVITY = {
    Family.ID: NONE,
    Family.RECIPROCAL: NONE,
    Family.TAU: NONE,
    Family.POWER_LOG: NONE,
    Family.LOG: COMPLETELY_ADDITIVE,
    Family.BIG_OMEGA: COMPLETELY_ADDITIVE,
    Family.OMEGA: ADDITIVE,
    Family.LOG_KAPPA: ADDITIVE,
    Family.GENERAL_S_ETA: ADDITIVE,
}


@dataclass(frozen=True)
class FunctionSpec:
    """An admissible arithmetic function f, named by family and parameters."""

    family: Family
    beta: float = 0.0
    delta: float = 0.0
    S: SetS | None = None
    eta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.GENERAL_S_ETA:
            if self.S is None:
                raise UsageError("seta needs a set S")
            if self.eta < 0:
                raise UsageError("eta must be >= 0")

    # constructors -----------------------------------------------------------
    @classmethod
    def id(cls):
        return cls(Family.ID)

    @classmethod
    def reciprocal(cls):
        return cls(Family.RECIPROCAL)

    @classmethod
    def tau(cls):
        return cls(Family.TAU)

    @classmethod
    def log(cls):
        return cls(Family.LOG)

    @classmethod
    def log_kappa(cls):
        return cls(Family.LOG_KAPPA)

    @classmethod
    def omega(cls):
        return cls(Family.OMEGA)

    @classmethod
    def big_omega(cls):
        return cls(Family.BIG_OMEGA)

    @classmethod
    def power_log(cls, beta, delta):
        return cls(Family.POWER_LOG, beta=float(beta), delta=float(delta))

    @classmethod
    def s_eta(cls, S, eta):
        if isinstance(S, str):
            S = SetS.parse(S)
        return cls(Family.GENERAL_S_ETA, S=S, eta=float(eta))

    @classmethod
    def parse(cls, text: str) -> FunctionSpec:
        """Inverse of ``str(spec)``: ``tau``, ``powerlog:0.5,1``, ``seta:1,from:3;2``."""
        text = text.strip().lower()
        name, _, arg = text.partition(":")
        if name == "powerlog":
            b, d = (float(v) for v in arg.split(","))
            return cls.power_log(b, d)
        if name == "seta":
            s_text, _, eta = arg.rpartition(";")
            if not s_text:
                raise UsageError("seta spec must look like seta:<S>;<eta>")
            return cls.s_eta(SetS.parse(s_text), float(eta))
        try:
            return cls(Family(name))
        except ValueError:
            raise UsageError(f"unknown function family {text!r}") from None

    def __str__(self):
        if self.family is Family.POWER_LOG:
            return f"powerlog:{self.beta:g},{self.delta:g}"
        if self.family is Family.GENERAL_S_ETA:
            return f"seta:{self.S};{self.eta:g}"
        return self.family.value

    # properties -------------------------------------------------------------
    @property
    def additivity(self) -> str:
        return _ADDITIVITY[self.family]

    @property
    def kind(self) -> str:
        if self.family in (Family.ID, Family.TAU, Family.OMEGA, Family.BIG_OMEGA):
            return INT
        if self.family is Family.GENERAL_S_ETA and self.eta == 0:
            return INT
        return FLOAT

    @property
    def growth(self) -> tuple:
        """(beta, delta) with f(n) << n**beta (log n)**delta, rigorous for each family."""
        fam = self.family
        if fam is Family.ID:
            return (1.0, 0.0)
        if fam is Family.RECIPROCAL:
            return (-1.0, 0.0)
        if fam is Family.TAU:
            return (0.5, 0.0)  # tau(n) <= 2 sqrt(n)
        if fam is Family.POWER_LOG:
            return (self.beta, self.delta)
        if fam is Family.GENERAL_S_ETA:
            return (0.0, self.eta + 1.0)
        return (0.0, 1.0)

    @property
    def eligible_general(self) -> bool:
        """True when the generic gcd asymptotic (beta < 1) applies."""
        return self.growth[0] < 1

    def as_s_eta(self) -> FunctionSpec | None:
        """The equivalent f_{S,eta} member, for the four named additive families."""
        fam = self.family
        if fam is Family.GENERAL_S_ETA:
            return self
        table = {
            Family.LOG: (SetS.natural(), 1.0),
            Family.BIG_OMEGA: (SetS.natural(), 0.0),
            Family.OMEGA: (SetS.singleton(), 0.0),
            Family.LOG_KAPPA: (SetS.singleton(), 1.0),
        }
        if fam in table:
            S, eta = table[fam]
            return FunctionSpec.s_eta(S, eta)
        return None


# --------------------------------------------------------------------------
# primes


def sieve_primes(n_max: int) -> np.ndarray:
    """All primes <= n_max, ascending, as int64."""
    n_max = int(n_max)
    if n_max < 2:
        raise UsageError("sieve_primes needs n_max >= 2")
    est = 1.3 * n_max / math.log(n_max) * 8
    if est > MEMORY_BUDGET:
        raise ResourceError(f"prime list up to {n_max} exceeds memory budget")
    if n_max <= SEGMENT_THRESHOLD:
        return kernels.small_primes(n_max)
    return _segmented_primes(n_max)


def _segmented_primes(n_max):
    base = kernels.small_primes(math.isqrt(n_max))
    odd_base = base[1:]
    chunks = [base]
    lo = base[-1] + 1 if len(base) else 2
    lo += lo % 2 == 0  # odd start
    span = 2 * SEGMENT_LENGTH
    while lo <= n_max:
        hi = min(lo + span, n_max + 1)
        mark = np.ones((hi - lo + 1) // 2, dtype=bool)  # lo, lo+2, ...
        for p in odd_base:
            p = int(p)
            if p * p >= hi:
                break
            start = max(p * p, (lo + p - 1) // p * p)
            if start % 2 == 0:
                start += p
            if start < hi:
                mark[(start - lo) // 2::p] = False
        nums = lo + 2 * np.flatnonzero(mark).astype(np.int64)
        chunks.append(nums[nums <= n_max])
        lo = hi + (hi % 2 == 0)
    return np.concatenate(chunks).astype(np.int64)


@lru_cache(maxsize=4)
def _primes_cached(n_max):
    out = sieve_primes(n_max)
    out.flags.writeable = False
    return out


def primes_upto(n_max: int) -> np.ndarray:
    """Cached read-only prime list."""
    return _primes_cached(int(n_max))


# --------------------------------------------------------------------------
# standard tables


def _pp(func):
    return func


_STANDARD = {
    # name: (ppfunc(p, k), dtype, additive, magnitude exponent e with |f(n)| <= n**e)
    "mu": (lambda p, k: np.where(k == 1, -1, 0), np.int64, False, 0),
    "tau": (lambda p, k: k + 1, np.int64, False, 1),
    "omega": (lambda p, k: np.ones_like(k), np.int64, True, 1),
    "big_omega": (lambda p, k: k, np.int64, True, 1),
    "two_pow_omega": (lambda p, k: np.full_like(k, 2), np.int64, False, 1),
    "kappa": (lambda p, k: p, np.int64, False, 1),
    "jordan2": (lambda p, k: p ** (2 * k) - p ** (2 * k - 2), np.int64, False, 2),
    "psi": (lambda p, k: np.where(k % 2 == 1, 1, -1) * (k - 1), np.int64, False, 1),
    "tau_squared": (lambda p, k: (k + 1) ** 2, np.int64, False, 1.2),
    "phi": (lambda p, k: p**k - p ** (k - 1), np.int64, False, 1),
    "one": (lambda p, k: np.ones_like(k), np.int64, False, 0),
    "id": (lambda p, k: p**k, np.int64, False, 1),
}

STANDARD_NAMES = tuple(sorted(set(_STANDARD) | {"von_mangoldt"}))


def _segment_arg(n_max):
    return SEGMENT_LENGTH if n_max > SEGMENT_THRESHOLD else None


def _check_magnitude(name, n_max, exponent):
    if exponent and exponent * math.log(max(n_max, 2)) + math.log(4) >= math.log(_I64_MAX):
        raise TableOverflowError(f"{name} up to {n_max} may exceed int64")


def sieve_standard(name: str, n_max: int) -> ValueTable:
    """Table of a named standard arithmetic function on 1..n_max."""
    n_max = int(n_max)
    if n_max < 1:
        raise UsageError("n_max must be >= 1")
    if name == "von_mangoldt":
        _check_budget(n_max, 8)
        vals = np.zeros(n_max + 1, dtype=np.float64)
        if n_max >= 2:
            ps = primes_upto(n_max)
            logs = np.log(ps.astype(np.float64))
            pk = ps.copy()
            keep = np.ones(len(ps), dtype=bool)
            while keep.any():
                vals[pk[keep]] = logs[keep]
                with np.errstate(over="ignore"):
                    keep &= pk <= n_max // ps
                pk = np.where(keep, pk * ps, pk)
        return ValueTable(name, vals, FLOAT)
    try:
        ppfunc, dtype, additive, expo = _STANDARD[name]
    except KeyError:
        raise UsageError(f"unknown standard table {name!r}; choose from {', '.join(STANDARD_NAMES)}") from None
    _check_budget(n_max, 8)
    _check_magnitude(name, n_max, expo)
    vals = kernels.prime_power_table(n_max, ppfunc, dtype, additive, _segment_arg(n_max))
    vals[0] = 0
    return ValueTable(name, vals, INT)


def dirichlet_convolve(f: ValueTable, g: ValueTable, name=None) -> ValueTable:
    """(f * g)(n) = sum over d e = n of f(d) g(e)."""
    if f.n_max != g.n_max:
        raise UsageError(f"n_max mismatch: {f.n_max} vs {g.n_max}")
    kind = INT if (f.kind == INT and g.kind == INT) else FLOAT
    if kind == INT:
        # every output entry is bounded by sum|f| * max|g|
        bound = int(np.abs(f.values).sum(dtype=object)) * int(np.abs(g.values).max())
        if bound > _I64_MAX:
            raise TableOverflowError(f"convolution {f.name}*{g.name} may overflow int64")
        a, b = f.values, g.values
    else:
        a, b = f.values.astype(np.float64), g.values.astype(np.float64)
    out = kernels.dirichlet_convolve(a, b)
    out[0] = 0
    return ValueTable(name or f"({f.name}*{g.name})", out, kind)


def pointwise(name, f: ValueTable, g: ValueTable, op="mul") -> ValueTable:
    """Entrywise product (or sum) of two tables, with the int overflow guard."""
    if f.n_max != g.n_max:
        raise UsageError("n_max mismatch")
    kind = INT if (f.kind == INT and g.kind == INT) else FLOAT
    if kind == INT and op == "mul":
        big = float(np.abs(f.values).max()) * float(np.abs(g.values).max())
        if big >= _I64_MAX:
            raise TableOverflowError(f"{name} overflows int64")
    a = f.values if kind == INT else f.values.astype(np.float64)
    b = g.values if kind == INT else g.values.astype(np.float64)
    vals = a * b if op == "mul" else a + b
    return ValueTable(name, vals, kind)


# --------------------------------------------------------------------------
# f and mu*f tables for a FunctionSpec


def _log_arange(n_max):
    vals = np.zeros(n_max + 1, dtype=np.float64)
    vals[1:] = np.log(np.arange(1, n_max + 1, dtype=np.float64))
    return vals


def _s_eta_ppfunc(S: SetS, eta: float, integer: bool):
    def ppfunc(p, k):
        cnt = S.count_upto(k)
        if integer:
            return cnt
        return np.log(p.astype(np.float64)) ** eta * cnt

    return ppfunc


def build_f_table(spec: FunctionSpec, n_max: int) -> ValueTable:
    """values[n] = f(n) for n = 1..n_max."""
    n_max = int(n_max)
    if n_max < 1:
        raise UsageError("n_max must be >= 1")
    _check_budget(n_max, 8)
    fam, name = spec.family, str(spec)
    if fam is Family.ID:
        vals = np.arange(n_max + 1, dtype=np.int64)
        return ValueTable(name, vals, INT)
    if fam is Family.RECIPROCAL:
        vals = np.zeros(n_max + 1)
        vals[1:] = 1.0 / np.arange(1, n_max + 1, dtype=np.float64)
        return ValueTable(name, vals, FLOAT)
    if fam is Family.TAU:
        return ValueTable(name, sieve_standard("tau", n_max).values.copy(), INT)
    if fam is Family.OMEGA:
        return ValueTable(name, sieve_standard("omega", n_max).values.copy(), INT)
    if fam is Family.BIG_OMEGA:
        return ValueTable(name, sieve_standard("big_omega", n_max).values.copy(), INT)
    if fam is Family.LOG:
        return ValueTable(name, _log_arange(n_max), FLOAT)
    if fam is Family.LOG_KAPPA:
        vals = kernels.prime_power_table(
            n_max, lambda p, k: np.log(p.astype(np.float64)), np.float64, True, _segment_arg(n_max)
        )
        vals[0] = 0.0
        return ValueTable(name, vals, FLOAT)
    if fam is Family.POWER_LOG:
        n = np.arange(n_max + 1, dtype=np.float64)
        vals = np.zeros(n_max + 1)
        if n_max >= 2:
            vals[2:] = n[2:] ** spec.beta * np.log(n[2:]) ** spec.delta
        vals[1] = 1.0 if spec.delta == 0 else 0.0
        return ValueTable(name, vals, FLOAT)
    if fam is Family.GENERAL_S_ETA:
        integer = spec.kind == INT
        dtype = np.int64 if integer else np.float64
        vals = kernels.prime_power_table(
            n_max, _s_eta_ppfunc(spec.S, spec.eta, integer), dtype, True, _segment_arg(n_max)
        )
        vals[0] = 0
        return ValueTable(name, vals, spec.kind)
    raise UsageError(f"no table builder for {spec}")  # pragma: no cover


def _prime_power_support(n_max, S: SetS, weight_of_p, dtype):
    """Table vanishing off prime powers, equal to weight(p) at p**nu with nu in S."""
    vals = np.zeros(n_max + 1, dtype=dtype)
    if n_max < 2:
        return vals
    ps = primes_upto(n_max)
    w = weight_of_p(ps)
    pk = ps.copy()
    nu = 1
    alive = np.ones(len(ps), dtype=bool)
    while alive.any():
        if nu in S:
            vals[pk[alive]] = w[alive]
        alive &= pk <= n_max // ps
        pk = np.where(alive, pk * ps, pk)
        nu += 1
    return vals


def build_h_table(spec: FunctionSpec, n_max: int) -> ValueTable:
    """values[n] = (mu * f)(n)."""
    n_max = int(n_max)
    if n_max < 1:
        raise UsageError("n_max must be >= 1")
    _check_budget(n_max, 8)
    name = f"mu*{spec}"
    seta = spec.as_s_eta()
    if seta is not None:
        if seta.kind == INT:
            vals = _prime_power_support(n_max, seta.S, lambda ps: np.ones(len(ps), dtype=np.int64), np.int64)
            return ValueTable(name, vals, INT)
        eta = seta.eta
        vals = _prime_power_support(
            n_max, seta.S, lambda ps: np.log(ps.astype(np.float64)) ** eta, np.float64
        )
        return ValueTable(name, vals, FLOAT)
    fam = spec.family
    if fam is Family.ID:
        return ValueTable(name, sieve_standard("phi", n_max).values.copy(), INT)
    if fam is Family.TAU:
        return ValueTable(name, sieve_standard("one", n_max).values.copy(), INT)
    if fam is Family.RECIPROCAL:
        # (mu * 1/n)(p^k) = (1 - p) / p^k
        vals = kernels.prime_power_table(
            n_max,
            lambda p, k: (1.0 - p) / p.astype(np.float64) ** k,
            np.float64,
            False,
            _segment_arg(n_max),
        )
        vals[0] = 0.0
        return ValueTable(name, vals, FLOAT)
    return dirichlet_convolve(sieve_standard("mu", n_max), build_f_table(spec, n_max), name=name)


# --------------------------------------------------------------------------
# table store


class TableStore:
    """Lazily built, size-growing cache of tables shared by the summation code.

    With ``cache_dir`` set (or ``HYPSUM_CACHE`` in the environment), tables
    are persisted in the HSVT binary format and reloaded on later runs.
    """

    def __init__(self, cache_dir=None):
        if cache_dir is None:
            cache_dir = os.environ.get("HYPSUM_CACHE") or None
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._tables: dict[str, ValueTable] = {}
        self._lock = threading.Lock()

    def _cache_path(self, key, n_max):
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in key)
        return self.cache_dir / f"{safe}-{n_max}.hsvt"

    def get(self, key: str, n_max: int, builder) -> ValueTable:
        n_max = max(int(n_max), 1)
        with self._lock:
            have = self._tables.get(key)
            if have is not None and have.n_max >= n_max:
                return have
            table = None
            if self.cache_dir is not None:
                path = self._cache_path(key, n_max)
                if path.exists():
                    table = ValueTable.load(path, name=key)
            if table is None:
                table = builder(n_max)
                if self.cache_dir is not None:
                    self.cache_dir.mkdir(parents=True, exist_ok=True)
                    table.dump(self._cache_path(key, n_max))
            self._tables[key] = table
            return table

    def standard(self, name, n_max) -> ValueTable:
        return self.get(f"std:{name}", n_max, lambda n: sieve_standard(name, n))

    def f(self, spec: FunctionSpec, n_max) -> ValueTable:
        return self.get(f"f:{spec}", n_max, lambda n: build_f_table(spec, n))

    def h(self, spec: FunctionSpec, n_max) -> ValueTable:
        return self.get(f"h:{spec}", n_max, lambda n: build_h_table(spec, n))

    def clear(self):
        with self._lock:
            self._tables.clear()


_default_store = None


def default_store() -> TableStore:
    global _default_store
    if _default_store is None:
        _default_store = TableStore()
    return _default_store

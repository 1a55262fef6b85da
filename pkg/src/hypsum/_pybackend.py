"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or ``HYPSUM_PURE=1``), and
always for tables above the segmentation threshold, since the segmented
factor sieve here never materialises a smallest-prime-factor array.

All tables are 1-indexed numpy arrays of length ``n_max + 1``; slot 0 is
ignored and kept at 0.
"""

import math

import numpy as np

NAME = "python"

_PAIR_CHUNK = 1 << 21


def small_primes(limit):
    """Primes <= limit by a plain odd-only Eratosthenes sieve."""
    if limit < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(limit // 2 + 1, dtype=bool)  # sieve[i] <-> 2i+1
    sieve[0] = False
    for i in range(1, (math.isqrt(limit) - 1) // 2 + 1):
        if sieve[i]:
            p = 2 * i + 1
            sieve[p * p // 2::p] = False
    odd = 2 * np.flatnonzero(sieve[: (limit - 1) // 2 + 1]).astype(np.int64) + 1
    return np.concatenate(([2], odd)).astype(np.int64)


def spf_table(n_max):
    """Smallest prime factor of every n <= n_max (spf[1] = 1)."""
    spf = np.zeros(n_max + 1, dtype=np.int64)
    if n_max >= 1:
        spf[1] = 1
    for p in small_primes(math.isqrt(n_max))[::-1]:
        spf[p::p] = p
    rest = spf == 0
    rest[0] = False
    spf[rest] = np.flatnonzero(rest)
    return spf


def _segment(lo, hi, primes, ppfunc, dtype, additive):
    """Values of a multiplicative/additive function on [lo, hi)."""
    rem = np.arange(lo, hi, dtype=np.int64)
    vals = np.zeros(hi - lo, dtype=dtype) if additive else np.ones(hi - lo, dtype=dtype)
    for p in primes:
        p = int(p)
        if p * p > hi - 1:
            break
        start = (-lo) % p
        sub = rem[start::p] // p
        k = np.ones(sub.shape, dtype=np.int64)
        more = sub % p == 0
        while more.any():
            k[more] += 1
            sub[more] //= p
            more &= sub % p == 0
        rem[start::p] = sub
        contrib = ppfunc(np.full(sub.shape, p, dtype=np.int64), k)
        if additive:
            vals[start::p] += contrib
        else:
            vals[start::p] *= contrib
    big = rem > 1
    if big.any():
        contrib = ppfunc(rem[big], np.ones(int(big.sum()), dtype=np.int64))
        if additive:
            vals[big] += contrib
        else:
            vals[big] *= contrib
    return vals


def prime_power_table(n_max, ppfunc, dtype, additive=False, segment=None):
    """Build f on 1..n_max from its prime-power values.

    ``ppfunc(p, k)`` receives equal-length int64 arrays and returns f(p**k)
    (multiplicative) or the additive contribution of p**k. ``segment`` bounds
    the working-set length; ``None`` means a single segment.
    """
    out = np.zeros(n_max + 1, dtype=dtype)
    if n_max < 1:
        return out
    primes = small_primes(math.isqrt(n_max))
    step = n_max if segment is None else max(int(segment), 1)
    lo = 1
    while lo <= n_max:
        hi = min(lo + step, n_max + 1)
        out[lo:hi] = _segment(lo, hi, primes, ppfunc, dtype, additive)
        lo = hi
    return out


def dirichlet_convolve(f, g):
    n_max = len(f) - 1
    dtype = np.result_type(f.dtype, g.dtype)
    out = np.zeros(n_max + 1, dtype=dtype)
    nz = np.flatnonzero(f[1:]) + 1
    for d in nz:
        d = int(d)
        out[d::d] += f[d] * g[1 : n_max // d + 1]
    return out


def _pair_chunks(x):
    """Yield (m, n) arrays covering every pair with m*n <= x, in m order."""
    ms = np.arange(1, x + 1, dtype=np.int64)
    counts = x // ms
    ends = np.cumsum(counts)
    start_idx = 0
    while start_idx < x:
        base = ends[start_idx - 1] if start_idx else 0
        stop_idx = int(np.searchsorted(ends, base + _PAIR_CHUNK, side="right"))
        stop_idx = max(stop_idx, start_idx + 1)
        cnt = counts[start_idx:stop_idx]
        m = np.repeat(ms[start_idx:stop_idx], cnt)
        offsets = np.repeat(np.cumsum(cnt) - cnt, cnt)
        n = np.arange(len(m), dtype=np.int64) - offsets + 1
        yield m, n
        start_idx = stop_idx


def pair_sum(f, x, side):
    """Sum of f(gcd(m,n)) (side 0) or f(lcm(m,n)) (side 1) over m*n <= x."""
    floating = f.dtype.kind == "f"
    parts = []
    total = 0
    for m, n in _pair_chunks(x):
        g = np.gcd(m, n)
        idx = g if side == 0 else (m // g) * n
        if floating:
            parts.append(float(np.sum(f[idx])))
        else:
            total += int(np.sum(f[idx]))
    return math.fsum(parts) if floating else total


def compensated_cumsum(values):
    """Prefix sums of a float array carried in extended precision."""
    acc = np.cumsum(values.astype(np.longdouble))
    return acc.astype(np.float64)

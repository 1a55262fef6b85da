"""Time the compiled and numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--n 1e6] [--x 2e5] [--repeat 3]

Each kernel is run on both backends, outputs are compared, and the best of
``--repeat`` wall-clock times is reported with the speed-up.
"""

import argparse
import sys
import time

import numpy as np

from hypsum import kernels


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _same(a, b):
    if isinstance(a, np.ndarray):
        if a.dtype.kind == "f":
            return np.allclose(a, b, rtol=1e-12, atol=0)
        return np.array_equal(a, b)
    if isinstance(a, float):
        return abs(a - b) <= 1e-12 * max(abs(a), 1.0)
    return a == b


def cases(n, x):
    tau = lambda p, k: k + 1  # noqa: E731
    rng = np.random.default_rng(0)
    fi = rng.integers(-5, 6, n + 1)
    gi = rng.integers(-5, 6, n + 1)
    ff = rng.standard_normal(n + 1)
    small = np.arange(x + 1, dtype=np.int64)
    return [
        ("spf_table", lambda b: b.spf_table(n)),
        ("prime_power_table tau", lambda b: b.prime_power_table(n, tau, np.int64, False)),
        ("dirichlet_convolve int", lambda b: b.dirichlet_convolve(fi[: n // 10 + 1], gi[: n // 10 + 1])),
        ("pair_sum gcd", lambda b: b.pair_sum(small, x, 0)),
        ("pair_sum lcm float", lambda b: b.pair_sum(np.sqrt(np.arange(x + 1.0)), x, 1)),
        ("compensated_cumsum", lambda b: b.compensated_cumsum(ff)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=float, default=1e6, help="table size")
    ap.add_argument("--x", type=float, default=2e5, help="pair-sum bound")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    n, x = int(args.n), int(args.x)
    names = kernels.available_backends()
    if "cython" not in names:
        print("compiled backend not built; only the numpy backend is available", file=sys.stderr)
    backends = {name: kernels.get_backend(name) for name in names}
    print(f"{'kernel':<24} " + " ".join(f"{b:>10}" for b in backends) + f" {'speedup':>8}  agree")
    ok = True
    for label, fn in cases(n, x):
        times, outs = [], []
        for b in backends.values():
            t, out = _best(lambda: fn(b), args.repeat)
            times.append(t)
            outs.append(out)
        agree = all(_same(outs[0], o) for o in outs[1:])
        ok &= agree
        speed = f"{times[0] / times[-1]:8.1f}" if len(times) > 1 else f"{'-':>8}"
        print(f"{label:<24} " + " ".join(f"{t:10.4f}" for t in times) + f" {speed}  {agree}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

"""Compare the compiled and numpy kernel backends.

Both backends run on identical inputs; outputs are asserted bit-equal and
the best-of-N wall time is reported per kernel.

    python benchmarks/bench_kernels.py [--repeat 5] [--n 200000] [--grid 2049]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from sqckit import kernels
from sqckit.certify import oracle_lambdas


def _inputs(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3, 3, n)
    y = rng.uniform(-3, 3, n)
    lam = rng.uniform(0.01, 0.99, n)
    z = lam * x + (1 - lam) * y
    fx, fy, fz = x * x, y * y, z * z
    fz[:: 97] += 1e-3  # sprinkle violations so first_violation has work to find
    d2 = (x - y) ** 2
    return fx, fy, fz, lam, d2


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=200_000, help="triples for the sampled kernels")
    ap.add_argument("--grid", type=int, default=2049, help="grid size for the oracle scan")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backs = kernels.backends()
    if "cython" not in backs:
        print("compiled backend not available; only the numpy fallback can be timed")
    fx, fy, fz, lam, d2 = _inputs(args.n, args.seed)
    # no violations: force a full scan
    clean = (fx, fy, np.minimum(fz, np.maximum(fx, fy)), lam, d2)
    t = np.linspace(-2, 2, args.grid)
    grid_f = t * t
    grid_f[args.grid // 2] = -1.0
    h = float(t[1] - t[0])
    lams = oracle_lambdas()

    cases = {
        "first_violation": lambda k: k.first_violation(*clean, 2.0, 1e-9),
        "min_ratio": lambda k: k.min_ratio(fx, fy, fz, lam, d2, 1e-12),
        "oracle_scan": lambda k: k.oracle_scan(grid_f, h, lams),
    }
    print(f"{'kernel':<16} {'backend':<8} {'seconds':>10} {'speedup':>8}")
    for name, fn in cases.items():
        results = {}
        for bname, mod in backs.items():
            results[bname] = _time(lambda: fn(mod), args.repeat)
        ref = results["python"][1]
        for bname, (sec, out) in results.items():
            if out != ref:
                raise SystemExit(f"{name}: backend {bname} disagrees with numpy ({out} vs {ref})")
            speed = results["python"][0] / sec
            print(f"{name:<16} {bname:<8} {sec:10.4f} {speed:8.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Numpy implementations of the hot kernels.

Arithmetic is written in the same order as ``_ckernels.pyx`` so both
backends return bit-identical results (the extension is compiled without
FMA contraction).
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "python"


def _offsets(lambdas: np.ndarray, d: int) -> list[int]:
    seen: list[int] = []
    for lam in lambdas:
        m = int(math.floor((1.0 - lam) * d + 0.5))
        m = min(max(m, 1), d - 1)
        if m not in seen:
            seen.append(m)
    return seen


def oracle_scan(f, h, lambdas):
    """Minimum sigma ratio over grid triples (i, i+m, i+d).

    Returns ``(ratio, d, m, i, count)``; ``d = -1`` when no finite-max
    triple exists.
    """
    f = np.ascontiguousarray(f, dtype=np.float64)
    lambdas = np.ascontiguousarray(lambdas, dtype=np.float64)
    n = f.shape[0]
    h2 = h * h
    best = math.inf
    bd = bm = bi = -1
    count = 0
    for d in range(2, n):
        ms = _offsets(lambdas, d)
        width = n - d
        a = np.maximum(f[:width], f[d:])
        win = sliding_window_view(f, width)[ms]
        ms_arr = np.asarray(ms, dtype=np.float64)
        den = (ms_arr * (d - ms_arr))[:, None] * h2
        with np.errstate(invalid="ignore"):
            ratio = 2.0 * (a[None, :] - win) / den
        ratio[:, a == math.inf] = math.inf
        count += ratio.size
        k = int(np.argmin(ratio))
        r = ratio.flat[k]
        if r < best:
            best = float(r)
            bd = d
            bm = ms[k // width]
            bi = k % width
    return best, bd, bm, bi, count


def first_violation(fx, fy, fz, lam, d2, sigma, rtol):
    """Index of the first triple violating the sigma inequality, or -1."""
    mx = np.maximum(fx, fy)
    q = lam * (1.0 - lam) * d2
    rhs = mx - (0.5 * sigma) * q
    tau = rtol * (1.0 + np.abs(mx))
    with np.errstate(invalid="ignore"):
        viol = (fz > rhs + tau) & (mx != math.inf)
    idx = np.flatnonzero(viol)
    return int(idx[0]) if idx.size else -1


def min_ratio(fx, fy, fz, lam, d2, guard):
    """Smallest ratio 2*(max - f(z)) / (lam (1-lam) |x-y|^2).

    Returns ``(ratio, index, used)``; triples with a denominator below
    ``guard`` or an infinite endpoint maximum are skipped.
    """
    mx = np.maximum(fx, fy)
    den = lam * (1.0 - lam) * d2
    keep = (den >= guard) & (mx != math.inf)
    used = int(np.count_nonzero(keep))
    if used == 0:
        return math.inf, -1, 0
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = 2.0 * (mx - fz) / den
    ratio = np.where(keep, ratio, math.inf)
    k = int(np.argmin(ratio))
    return float(ratio[k]), k, used

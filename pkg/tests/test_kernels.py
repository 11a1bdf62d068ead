from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqckit import kernels
from sqckit.certify import oracle_lambdas

BACKS = kernels.backends()


def test_backend_selected():
    assert kernels.BACKEND in BACKS
    assert "python" in BACKS


def test_pure_env_forces_fallback():
    out = subprocess.run([sys.executable, "-c", "from sqckit import kernels; print(kernels.BACKEND)"],
                         env={**os.environ, "SQCKIT_PURE": "1"}, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def _batch(seed, n):
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(-3, 3, n), rng.uniform(-3, 3, n)
    lam = rng.uniform(0.01, 0.99, n)
    z = lam * x + (1 - lam) * y
    fz = z * z
    fz[rng.random(n) < 0.01] += 0.5
    return x * x, y * y, fz, lam, (x - y) ** 2


@given(st.integers(0, 10_000), st.integers(1, 3000), st.floats(0.0, 5.0))
def test_backends_agree(seed, n, sigma):
    args = _batch(seed, n)
    outs = [(m.first_violation(*args, sigma, 1e-9), m.min_ratio(*args, 1e-12)) for m in BACKS.values()]
    assert all(o == outs[0] for o in outs)


@given(st.integers(0, 10_000), st.integers(3, 400))
def test_oracle_scan_agrees(seed, n):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=n).cumsum() ** 2
    lams = oracle_lambdas()
    outs = [m.oracle_scan(f, 0.01, lams) for m in BACKS.values()]
    assert all(o == outs[0] for o in outs)

"""Hypothesis properties that hold for every input, not just the frozen examples."""
from __future__ import annotations

import json
import math

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from sqckit import expr as E
from sqckit.calculus import RuleApplication, certify_expr, replay
from sqckit.certify import Triple, ViolationWitness, defect, falsify, oracle_sigma_1d
from sqckit.geometry import Interval, SpaceSpec, parse_domain
from sqckit.serialize import deserialize, serialize
from sqckit.spaces import BoxBody, PNormBall, gauge_eval, hilbert_delta

coef = st.floats(-5.0, 5.0, allow_nan=False)
pos = st.floats(0.1, 10.0)
unit = st.floats(0.01, 0.99)


@st.composite
def poly(draw):
    a = draw(st.floats(0.0, 5.0))
    return E.Poly1D((draw(coef), draw(coef), a))


@st.composite
def exprs(draw, depth=2):
    base = draw(st.sampled_from(["poly", "abs", "lin", "qd"]))
    f = {"poly": lambda: draw(poly()), "abs": E.Abs1D, "lin": lambda: E.Linear1D(draw(pos), draw(coef)),
         "qd": E.QuadDip}[base]()
    for _ in range(draw(st.integers(0, depth))):
        op = draw(st.sampled_from(["scale", "shift", "max"]))
        if op == "scale":
            f = E.Scale(draw(pos), f)
        elif op == "shift":
            f = E.Shift([draw(coef)], f)
        else:
            f = E.MaxFinite((f, E.Shift([draw(coef)], f)))
    return f


@given(exprs())
def test_serialize_roundtrip(f):
    g = deserialize(serialize(f))
    assert serialize(g) == serialize(f)
    t = np.linspace(-3, 3, 13).reshape(-1, 1)
    assert np.array_equal(f.evaluate(t), g.evaluate(t))


@given(exprs(), coef, coef, unit)
def test_defect_definition(f, x, y, lam):
    assume(x != y)
    t = Triple([x], [y], lam)
    fx, fy, fz = (float(f.evaluate(np.array([[v]]))[0]) for v in (x, y, t.z[0]))
    assert defect(f, t) == max(fx, fy) - fz


@given(exprs(), st.integers(0, 100), st.floats(0.0, 4.0), st.floats(0.0, 4.0))
def test_falsify_monotone_in_sigma(f, seed, a, b):
    lo, hi = sorted((a, b))
    D = parse_domain("interval:-3:3")
    if falsify(f, D, lo, 500, seed=seed).found:
        assert falsify(f, D, hi, 500, seed=seed).found


@given(exprs(), st.integers(0, 100), st.floats(0.0, 8.0))
def test_witnesses_reverify(f, seed, sigma):
    r = falsify(f, parse_domain("interval:-3:3"), sigma, 500, seed=seed)
    if r.found:
        w = r.witness
        assert w.reverify(f, SpaceSpec(1))
        again = ViolationWitness.at(f, SpaceSpec(1), Triple.from_dict(json.loads(json.dumps(w.triple.to_dict()))),
                                    sigma)
        assert again.margin == w.margin


@given(st.floats(0.25, 8.0))
def test_oracle_scale_covariant(c):
    base = oracle_sigma_1d(E.QuadDip(), Interval(-4.0, 4.0), 513).sigma_hat
    scaled = oracle_sigma_1d(E.Scale(c, E.QuadDip()), Interval(-4.0, 4.0), 513).sigma_hat
    assert math.isclose(scaled, c * base, rel_tol=1e-12)


@given(st.floats(-1.0, 1.0))
def test_oracle_shift_invariant(a):
    f = E.Poly1D((0.0, 0.0, 1.0))
    base = oracle_sigma_1d(f, Interval(-1.0, 1.0), 257).sigma_hat
    # Shift(a, f)(x) = f(x + a)
    moved = oracle_sigma_1d(E.Shift([a], f), Interval(-a - 1.0, -a + 1.0), 257).sigma_hat
    assert math.isclose(moved, base, rel_tol=1e-6)


@given(st.floats(0.5, 5.0), st.floats(0.1, 5.0), st.floats(-5, 5), st.floats(-5, 5))
def test_gauge_positively_homogeneous(r, t, a, b):
    for body in (PNormBall(SpaceSpec(2), r), BoxBody([-r, -1.0], [1.0, r])):
        x = np.array([a, b])
        assert math.isclose(gauge_eval(body, t * x), t * gauge_eval(body, x), rel_tol=1e-12, abs_tol=1e-12)


@given(st.floats(0.0, 2.0))
def test_hilbert_above_quadratic(eps):
    assert hilbert_delta(eps) >= eps * eps / 8.0 - 1e-16


@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_certificate_trace_replays_from_json(c, s):
    f = E.Scale(c, E.Poly1D((0.0, 0.0, 1.0), sigma=s))
    cert = certify_expr(f, parse_domain("interval:-1:1"), estimate=False)
    steps = [RuleApplication.from_dict(d) for d in json.loads(json.dumps(cert.to_dict()))["trace"]]
    assert replay(steps) == cert.sigma == c * s

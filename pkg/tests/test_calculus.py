from __future__ import annotations

import math

import numpy as np
import pytest

from sqckit import expr as E
from sqckit.calculus import (RuleApplication, SigmaCertificate, certify_expr, check_convex, check_ell,
                             check_gamma, check_nondecreasing, estimate_constants, estimate_opnorm, exact_opnorm,
                             refute_with, replay, rule_affine_pre, rule_affine_preimage, rule_compose,
                             rule_infconv, rule_marginal, rule_marginal_min, rule_max_finite, rule_restrict,
                             rule_scale, rule_sup, rule_sup_value)
from sqckit.certify import Triple, falsify
from sqckit.errors import (ConstantsRefuted, EmptyFamily, GammaViolatedOnSamples, NegativeConstant,
                           NoCalculusRule, NonpositiveGamma, NonpositiveScalar)
from sqckit.geometry import SpaceSpec, parse_domain

X2D = E.Poly1D((0.0, 0.0, 1.0), sigma=2.0)
R2 = SpaceSpec(2)


def test_rule_arithmetic():
    assert rule_scale(2.0, 3.0) == 6.0
    assert rule_compose(2.0, 0.5) == 0.5
    assert rule_sup([3.0, 1.0, 2.0]) == 1.0
    assert rule_max_finite([3.0, 2.0]) == 2.0
    assert rule_marginal(2.0, 2.0) == 0.5
    assert rule_affine_preimage(2.0, 3.0) == 2.0 / 9.0
    assert rule_affine_pre(1.0, 2.0) == 0.25
    assert rule_infconv(1.5) == rule_marginal_min(1.5) == rule_sup_value(1.5) == 1.5
    assert rule_restrict(2.0, 0.5) == 0.5
    assert rule_restrict(2.0, 0.5, unit_speed=True) == 2.0


def test_rule_errors():
    with pytest.raises(NonpositiveScalar):
        rule_scale(1.0, 0.0)
    with pytest.raises(NegativeConstant):
        rule_scale(-1.0, 2.0)
    with pytest.raises(EmptyFamily):
        rule_sup([])
    with pytest.raises(NonpositiveGamma):
        rule_marginal(1.0, 0.0)


def _certify(f, spec):
    return certify_expr(f, parse_domain(spec), estimate=True, budget=5000, seed=0)


@pytest.mark.parametrize("f, spec, sigma", [
    (E.Scale(3.0, X2D), "interval:-3:3", 6.0),
    (E.ComposeMonotone(X2D, E.Linear1D(1.0, 1.0), ell=1.0, outer_interval=(1.0, 3.0)), "interval:0:2", 2.0),
    (E.MaxFinite((E.Shift([1.0], X2D), E.Shift([-1.0], X2D))), "interval:-2:2", 2.0),
    (E.ValueFn(E.QuadDip(sigma=2.0), E.AffinePreimage([[3.0]], [0.0])), "interval:-5:5", 2.0 / 9.0),
    (E.Norm(R2), "ball:0,0:1", 1.0),
    (E.Norm(R2), "ball:0,0:2", 0.5),
    (E.Norm(SpaceSpec(2, 4.0)), "ball:0,0:1@p=4", 0.0),
    (E.Restrict(E.Norm(R2), [0.0, 1.0], [0.6, 0.8], True), f"interval:0:{math.hypot(0.6, 0.2)!r}", 1.0),
])
def test_certify_examples(f, spec, sigma):
    cert = _certify(f, spec)
    assert math.isclose(cert.sigma, sigma, rel_tol=1e-12, abs_tol=1e-15)
    assert cert.kind == "derived"
    assert replay(cert) == cert.sigma


def test_derived_certificates_are_sound():
    for f, spec in [(E.Scale(3.0, X2D), "interval:-3:3"),
                    (E.ValueFn(E.QuadDip(sigma=2.0), E.AffinePreimage([[3.0]], [0.0])), "interval:-5:5")]:
        cert = _certify(f, spec)
        assert not falsify(f, parse_domain(spec), cert.sigma, 50_000, seed=1).found


def test_estimated_kind_propagates():
    cert = _certify(E.Scale(0.5, E.QuadDip()), "interval:-5:5")
    assert cert.kind == "estimated"
    assert abs(cert.sigma - 1.0) < 0.05


def test_no_rule_for_min_and_sum():
    with pytest.raises(NoCalculusRule):
        _certify(E.Min((X2D, E.Shift([1.0], X2D))), "interval:-2:2")
    with pytest.raises(NoCalculusRule):
        _certify(E.Sum((E.Shift([1.0], E.QuadDip()), E.Shift([-1.0], E.QuadDip()))), "interval:-2:2")


def test_replay_detects_tampering():
    cert = _certify(E.Scale(3.0, X2D), "interval:-3:3")
    d = cert.to_dict()
    d["trace"][-1]["output"] = 7.0
    steps = [RuleApplication.from_dict(s) for s in d["trace"]]
    with pytest.raises(ValueError):
        replay(steps)


def test_trace_roundtrip():
    cert = _certify(E.MaxFinite((E.Shift([1.0], X2D), E.Shift([-1.0], X2D))), "interval:-2:2")
    steps = [RuleApplication.from_dict(s.to_dict()) for s in cert.trace]
    assert steps == cert.trace


def test_refute_with():
    cert = SigmaCertificate(4.0, "declared")
    t = Triple([-5.0], [5.0], 0.5)
    out = refute_with(cert, E.QuadDip(), parse_domain("interval:-5:5"), t)
    assert out.kind == "refuted" and out.witness.margin > 0
    assert refute_with(SigmaCertificate(1.0, "declared"), E.QuadDip(), parse_domain("interval:-5:5"), t).kind \
        == "declared"


def test_opnorms():
    A = np.diag([3.0, -0.5])
    assert exact_opnorm(A, 2.0) == 3.0
    assert exact_opnorm(A, math.inf) == 3.0
    est = estimate_opnorm(A, budget=2000, seed=0)
    assert 2.9 <= est <= 3.0 + 1e-12


def test_estimate_constants():
    c = estimate_constants(E.AffinePreimage([[2.0]], [0.0]), parse_domain("interval:-1:1"), 2000, 0)
    assert c.gamma is not None and math.isclose(c.gamma, 2.0, rel_tol=1e-9)
    c = estimate_constants(E.Linear1D(2.0, 0.0), parse_domain("interval:-1:1"), 2000, 0)
    assert math.isclose(c.ell_lower, 2.0, rel_tol=1e-9)


def test_spot_checks():
    check_gamma(np.eye(2), 1.0, 2.0)
    with pytest.raises(GammaViolatedOnSamples):
        check_gamma(np.diag([1.0, 0.1]), 1.0, 2.0)
    D = parse_domain("interval:0:2")
    check_ell(E.Linear1D(2.0, 0.0), D, 2.0)
    with pytest.raises(ConstantsRefuted):
        check_ell(E.Linear1D(1.0, 0.0), D, 2.0)
    check_convex(E.Poly1D((0.0, 0.0, 1.0)), D)
    with pytest.raises(ConstantsRefuted):
        check_convex(E.Poly1D((0.0, 0.0, -1.0)), parse_domain("interval:-3:3"))
    check_nondecreasing(E.Linear1D(), 0.0, 1.0)
    with pytest.raises(ConstantsRefuted):
        check_nondecreasing(E.Poly1D((0.0, 0.0, 1.0)), -1.0, 1.0)


def test_shift_invariance():
    a = _certify(X2D, "interval:-2:2").sigma
    b = _certify(E.Shift([5.0], X2D), "interval:3:7").sigma
    assert a == b == 2.0

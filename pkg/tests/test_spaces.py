from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqckit.errors import (AssumptionAViolated, EpsOutOfRange, ExponentOutOfRange, NotInnerProduct,
                           OriginNotInterior)
from sqckit.geometry import SpaceSpec
from sqckit.spaces import (BoxBody, Ellipsoid, PNormBall, Polytope, check_assumption_A, exact_profile,
                           gauge_eval, gauge_sqc_check, hanner_delta, hilbert_delta, inner_product_norm_param,
                           modulus_empirical, modulus_exact, norm_sqc_param, power_norm_param,
                           sigma_at_distance)

L2 = SpaceSpec(2)
L4 = SpaceSpec(2, 4.0)


def test_hilbert_values():
    assert hilbert_delta(1.0) == 0.13397459621556135  # 1 - sqrt(3)/2
    assert hilbert_delta(2.0) == 1.0
    assert modulus_exact(SpaceSpec(7), 1.0).delta == hilbert_delta(1.0)


def test_hanner_values():
    assert math.isclose(hanner_delta(1.0, 4.0), 1 - (1 - 2 ** -4) ** 0.25, rel_tol=1e-14)
    assert hanner_delta(0.1, 4.0) == 1.5625036621227266e-06
    v = modulus_exact(SpaceSpec(2, 1.5), 1.0)
    assert v.delta >= (1.5 - 1) / 8 - 1e-15


def test_maxnorm_is_zero():
    v = modulus_exact(SpaceSpec(2, math.inf), 0.5)
    assert v.delta == 0.0 and v.source == "exact-maxnorm"


def test_eps_range():
    with pytest.raises(EpsOutOfRange):
        modulus_exact(L2, 2.5)
    with pytest.raises(EpsOutOfRange):
        modulus_exact(L2, -0.1)
    assert modulus_exact(L2, 0.0).delta == 0.0


def test_assumption_a_dichotomy():
    assert check_assumption_A(exact_profile(L2), 1.0).holds
    v = check_assumption_A(exact_profile(L4), 1.0)
    assert not v.holds and v.eps <= 0.1
    v = check_assumption_A(exact_profile(SpaceSpec(2, 1.5)), 0.5)
    assert v.holds


@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0, 1.9])
def test_empirical_matches_hilbert(eps):
    est = modulus_empirical(L2, eps, budget=4000, seed=0)
    assert abs(est.delta - hilbert_delta(eps)) < 1e-9
    assert est.delta >= hilbert_delta(eps) - 1e-12


def test_l4_scaling_law():
    a = sigma_at_distance(L4, 0.2, seed=0).sigma_hat
    b = sigma_at_distance(L4, 0.02, seed=0).sigma_hat
    assert 30.0 <= a / b <= 300.0


def test_parameters():
    assert inner_product_norm_param(2.0) == 0.5
    with pytest.raises(NotInnerProduct):
        inner_product_norm_param(1.0, L4)
    assert norm_sqc_param(1.0, 2.0) == 0.25
    with pytest.raises(AssumptionAViolated):
        norm_sqc_param(1.0, 1.0, exact_profile(L4))
    assert power_norm_param(1.0, 0.5, 4.0) == 0.25
    with pytest.raises(ExponentOutOfRange):
        power_norm_param(1.0, 2.0, 1.0)


def test_gauges():
    assert gauge_eval(PNormBall(L2, 2.0), [3.0, 4.0]) == 2.5
    box = BoxBody([-1.0, -2.0], [1.0, 2.0])
    assert gauge_eval(box, [0.5, -4.0]) == 2.0
    with pytest.raises(OriginNotInterior):
        BoxBody([0.0, -1.0], [1.0, 1.0])
    poly = Polytope([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [1.0, 1.0, 1.0, 1.0])
    assert gauge_eval(poly, [0.5, -2.0]) == 2.0
    with pytest.raises(OriginNotInterior):
        Polytope([[1.0, 0.0]], [-1.0])
    ell = Ellipsoid([[4.0, 0.0], [0.0, 1.0]])
    assert math.isclose(gauge_eval(ell, [0.5, 0.0]), 1.0)


def test_gauge_modulus_check():
    v = gauge_sqc_check(PNormBall(L2, 1.0), 0.5, seed=0)
    assert v.holds and v.certificate_sigma == 0.25
    v = gauge_sqc_check(BoxBody([-1.0, -1.0], [1.0, 1.0]), 0.5, seed=0)
    assert not v.holds


@given(st.floats(1e-3, 2.0), st.floats(1.05, 8.0))
def test_hanner_between_zero_and_one(eps, p):
    d = modulus_exact(SpaceSpec(2, p), eps).delta
    assert 0.0 <= d <= 1.0
    if p <= 2:
        assert d >= (p - 1) * eps * eps / 8 - 1e-12


@given(st.floats(1e-3, 2.0), st.floats(1e-3, 2.0))
def test_modulus_monotone(a, b):
    lo, hi = sorted((a, b))
    for sp in (L2, L4):
        assert modulus_exact(sp, lo).delta <= modulus_exact(sp, hi).delta + 1e-15

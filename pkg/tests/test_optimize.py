from __future__ import annotations

import numpy as np
import pytest

from sqckit import expr as E
from sqckit.errors import EmptyShell, NoFiniteValueFound
from sqckit.geometry import SpaceSpec, parse_domain
from sqckit.optimize import minimize, prox, quadratic_growth_check, supercoercivity_profile

QD = E.QuadDip()
F64 = E.Piecewise1D((0.0,), (None, E.Poly1D((0.0, 0.0, 1.0))), ((0.0, 1.0),))


def test_minimize_quaddip():
    r = minimize(QD, parse_domain("interval:-5:5"), seed=0)
    assert r.argmin.tolist() == [0.0] and r.value == -1.0
    assert len(r.distinct_local_minima) == 1 and not r.attainment_suspect


def test_minimize_norm_ball():
    r = minimize(E.Norm(SpaceSpec(2)), parse_domain("ball:0,0:1"), seed=0)
    assert np.linalg.norm(r.argmin) < 1e-6


def test_minimize_reports_non_attainment():
    r = minimize(F64, parse_domain("interval:0:10"), seed=0)
    assert r.attainment_suspect


def test_minimize_all_infinite():
    f = E.Piecewise1D((0.0,), (None, None))
    with pytest.raises(NoFiniteValueFound):
        minimize(f, parse_domain("interval:-1:1"))


def test_prox():
    D = parse_domain("interval:-20:20")
    r = prox(QD, [3.0], search_domain=D, seed=0)
    assert abs(r.points[0][0] - 1.0) < 1e-6
    r = prox(QD, [0.0], search_domain=D, seed=0)
    assert abs(r.points[0][0]) < 1e-6
    with pytest.raises(ValueError):
        prox(QD, [0.0])


def test_prox_empty_when_infimum_not_attained():
    r = prox(F64, [0.0], search_domain=parse_domain("interval:0:10"), seed=0)
    assert r.empty


@pytest.mark.parametrize("sigma, ok", [(2.0, True), (8.0, False)])
def test_growth(sigma, ok):
    rep = quadratic_growth_check(QD, [0.0], sigma, parse_domain("interval:-5:5"), samples=5000, seed=0)
    assert rep.passed is ok
    assert rep.reverify(QD)


def test_coercive():
    pos = supercoercivity_profile(QD, [0.0], 2, radii=(10.0, 50.0, 100.0), seed=0)
    assert pos.verdict == "positive-liminf-on-range"
    assert all(abs(v - 1.0) < 0.1 for v in pos.inf_ratio_per_radius)
    neg = supercoercivity_profile(E.Linear1D(), [0.0], 1, radii=(10.0, 100.0), seed=0)
    assert neg.verdict == "negative"
    assert pos.recompute(QD) == list(pos.inf_ratio_per_radius)


def test_coercive_empty_shell():
    f = E.Piecewise1D((0.0,), (None, None))
    with pytest.raises(EmptyShell):
        supercoercivity_profile(f, [0.0], 2, radii=(10.0, 20.0), seed=0)

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqckit.errors import LoAboveHi, NonpositiveRadius, SpecSyntax
from sqckit.geometry import Ball, Box, Interval, Segment, SpaceSpec, parse_domain, pnorm


def test_parse_interval():
    d = parse_domain("interval:-1:1")
    assert isinstance(d, Interval)
    assert d.dim == 1 and d.space.p == 2.0
    assert d.to_spec() == "interval:-1.0:1.0@p=2.0"


def test_parse_lp_ball():
    d = parse_domain("ball:0,0:1@p=4")
    assert isinstance(d, Ball)
    assert d.space == SpaceSpec(2, 4.0)
    assert d.radius == 1.0


def test_parse_box_and_segment():
    b = parse_domain("box:0,0:1,2")
    assert isinstance(b, Box) and b.dim == 2
    s = parse_domain("segment:0,1:0.6,0.8")
    assert isinstance(s, Segment)
    assert math.isclose(s.diameter(), math.hypot(0.6, 0.2))


@pytest.mark.parametrize("spec, exc", [
    ("box:0:-1", LoAboveHi),
    ("interval:2:1", LoAboveHi),
    ("ball:0,0:-1", NonpositiveRadius),
    ("ball:0,0:0", NonpositiveRadius),
    ("blob:1:2", SpecSyntax),
    ("interval:a:1", SpecSyntax),
    ("ball:0,0:1@p=1", SpecSyntax),
])
def test_parse_errors(spec, exc):
    with pytest.raises(exc):
        parse_domain(spec)


def test_pnorm_values():
    X = np.array([[3.0, 4.0], [1.0, -1.0]])
    assert pnorm(X, 2.0).tolist() == [5.0, math.sqrt(2.0)]
    assert pnorm(X, math.inf).tolist() == [4.0, 1.0]


@pytest.mark.parametrize("spec", ["ball:0,0:1", "ball:1,-1,2:2@p=4", "box:-1,0:1,3", "interval:-2:5",
                                  "segment:0,0:1,1", "ball:0,0:1@p=inf", "ball:0,0:1@p=1.5"])
def test_samples_stay_inside(spec):
    d = parse_domain(spec)
    rng = np.random.default_rng(3)
    assert d.contains(d.sample_uniform(rng, 500)).all()
    assert d.contains(d.sample_boundary(rng, 500)).all()
    assert d.contains(d.anchors()).all()
    assert d.contains(d.project(d.reflect(d.sample_uniform(rng, 50)))).all()


def test_ball_boundary_samples_hug_sphere():
    d = parse_domain("ball:0,0:2@p=4")
    pts = d.sample_boundary(np.random.default_rng(0), 100)
    r = pnorm(pts, 4.0)
    assert np.all(r <= 2.0 + 1e-12) and np.all(r >= 1.8 - 1e-12)


@given(st.floats(-10, 10), st.floats(0.01, 10))
def test_interval_max_norm(lo, width):
    d = Interval(lo, lo + width)
    assert d.max_norm() == max(abs(lo), abs(lo + width))


def test_affine_image_contains_images():
    d = parse_domain("ball:0,0:1")
    A = np.array([[2.0, 1.0], [0.0, -1.0]])
    b = np.array([0.5, 0.0])
    img = d.affine_image(A, b)
    pts = d.sample_uniform(np.random.default_rng(1), 300)
    assert img.contains(pts @ A.T + b, tol=1e-9).all()

from __future__ import annotations

import math

import numpy as np
import pytest

from sqckit import expr as E
from sqckit.certify import (NON_PROOF, Triple, ViolationWitness, certify_on_segments, defect, estimate_sigma,
                            falsify, generate_triples, oracle_sigma_1d)
from sqckit.errors import AllSamplesDegenerate, GridTooCoarse
from sqckit.geometry import Interval, SpaceSpec, parse_domain

X2 = E.Poly1D((0.0, 0.0, 1.0))
QD = E.QuadDip()
F64 = E.Piecewise1D((0.0,), (None, X2), ((0.0, 1.0),))


# oracle values computed once with grid 8193 and frozen here
@pytest.mark.parametrize("f, iv, frozen, analytic", [
    (X2, (-1.0, 1.0), 2.0, 2.0),
    (E.Abs1D(), (-1.0, 1.0), 1.0001220852154804, 1.0),
    (QD, (-10.0, 10.0), 2.0, 2.0),
    (E.Linear1D(), (0.0, 1.0), 2.000244170430961, 2.0),
    (F64, (0.0, 10.0), 4.000244170430961, 4.0),
])
def test_oracle_frozen(f, iv, frozen, analytic):
    r = oracle_sigma_1d(f, Interval(*iv), 8193)
    assert r.sigma_hat == frozen
    assert abs(r.sigma_hat - analytic) <= 0.05


def test_oracle_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        oracle_sigma_1d(X2, Interval(-1, 1), 2)


def test_shifted_dip_sum_triple():
    g = E.Sum((E.Shift([1.0], QD), E.Shift([-1.0], QD)))
    lam = (1.0 - math.sqrt(3.0) / 2.0) / 2.0
    t = Triple([-1.0], [1.0], lam)
    assert t.z[0] == 0.8660254037844386
    assert defect(g, t) == -0.5
    r = falsify(g, parse_domain("interval:-2:2"), 0.0, 1000, seed=1, hints=(t,))
    assert r.found and r.witness.triple.lam == lam


def test_linear_fails_at_r2():
    r = falsify(E.Linear1D(), parse_domain("interval:-2:2"), 2.0, 100_000, seed=7)
    w = r.witness
    assert w.triple.x.tolist() == [-2.0] and w.triple.y.tolist() == [2.0] and w.triple.lam == 0.5
    assert w.margin == 2.0
    assert w.reverify(E.Linear1D(), SpaceSpec(1))


def test_min_of_parabolas_witness():
    f = E.Min((E.Poly1D((1.0, -2.0, 1.0)), E.Poly1D((1.0, 2.0, 1.0))))
    r = falsify(f, parse_domain("interval:-2:2"), 0.0, 1000, seed=0)
    w = r.witness
    assert (w.triple.x[0], w.triple.y[0], w.triple.lam) == (-1.0, 1.0, 0.5)
    assert w.margin == 1.0


def test_quaddip_sigma4_refuted_sigma2_not():
    D = parse_domain("interval:-5:5")
    r4 = falsify(QD, D, 4.0, 100_000, seed=0)
    assert r4.found
    assert (r4.witness.triple.x[0], r4.witness.triple.y[0], r4.witness.triple.lam) == (-5.0, 5.0, 0.5)
    r2 = falsify(QD, D, 2.0, 100_000, seed=0)
    assert not r2.found
    assert r2.to_dict()["disclaimer"] == NON_PROOF


def test_witness_hex_roundtrip():
    w = ViolationWitness.at(QD, SpaceSpec(1), Triple([-0.1], [0.3], 0.3), 40.0)
    t = Triple.from_dict(w.triple.to_dict())
    assert np.array_equal(t.x, w.triple.x) and t.lam == w.triple.lam


def test_defect_values():
    assert defect(X2, Triple([-1.0], [1.0], 0.5), domain=Interval(-1.0, 1.0)) == 1.0
    assert defect(E.Linear1D(), Triple([0.0], [1.0], 0.25)) == 0.25


def test_triples_are_deterministic():
    D = parse_domain("ball:0,0:1")
    a = generate_triples(E.Norm(SpaceSpec(2)), D, 5000, 3)
    b = generate_triples(E.Norm(SpaceSpec(2)), D, 5000, 3)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.lam, b.lam)


@pytest.mark.parametrize("threads", [1, 4])
def test_falsify_thread_independent(threads):
    D = parse_domain("interval:-5:5")
    base = falsify(QD, D, 4.0, 50_000, seed=42, threads=1)
    r = falsify(QD, D, 4.0, 50_000, seed=42, threads=threads)
    assert r.to_dict() == base.to_dict()
    est1 = estimate_sigma(QD, D, 50_000, seed=1, threads=1)
    est = estimate_sigma(QD, D, 50_000, seed=1, threads=threads)
    assert est.to_dict() == est1.to_dict()


@pytest.mark.parametrize("spec", ["ball:0,0:1", "ball:0,0,0,0,0,0,0,0:1"])
def test_euclidean_ball(spec):
    D = parse_domain(spec)
    f = E.Norm(SpaceSpec(D.dim))
    for seed in (1, 7, 42):
        assert not falsify(f, D, 0.5, 100_000, seed=seed).found
    assert 0.95 <= estimate_sigma(f, D, 100_000, seed=0).sigma_hat <= 1.1


def test_segments_agree():
    r = certify_on_segments(E.Norm(SpaceSpec(2)), parse_domain("ball:0,0:1"), 200, 1025, seed=0)
    assert 0.95 <= r.sigma_hat <= 1.1


def test_not_quasiconvex_estimate():
    g = E.Sum((E.Shift([1.0], QD), E.Shift([-1.0], QD)))
    est = estimate_sigma(g, parse_domain("interval:-2:2"), 20_000, seed=0)
    assert not est.quasiconvex and est.sigma_hat == 0.0 and est.witness.holds


def test_all_degenerate():
    with pytest.raises(AllSamplesDegenerate):
        estimate_sigma(E.Piecewise1D((0.0,), (None, None)), parse_domain("interval:-1:1"), 200, seed=0)


@pytest.mark.parametrize("f, spec", [(QD, "interval:-10:10"), (E.Abs1D(), "interval:-1:1"),
                                     (X2, "interval:-1:1"), (E.Linear1D(), "interval:0:4")])
def test_estimator_falsifier_consistency(f, spec):
    D = parse_domain(spec)
    s = oracle_sigma_1d(f, D, 8193).sigma_hat
    assert not falsify(f, D, s - 0.05, 20_000, seed=0).found
    assert falsify(f, D, s + 0.5, 200_000, seed=0).found


@pytest.mark.parametrize("c", [0.5, 3.0])
@pytest.mark.parametrize("f, spec", [(QD, "interval:-5:5"), (E.Norm(SpaceSpec(2)), "ball:0,0:1")])
def test_scale_covariance(c, f, spec):
    D = parse_domain(spec)
    a = estimate_sigma(f, D, 20_000, seed=2).sigma_hat
    b = estimate_sigma(E.Scale(c, f), D, 20_000, seed=2).sigma_hat
    assert abs(b - c * a) <= 0.02 * c * a

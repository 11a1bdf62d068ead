from __future__ import annotations

import json
import math

import numpy as np
import pytest

from sqckit import expr as E
from sqckit.errors import (DimensionMismatch, EmptyFamily, EvaluationError, InvalidConstant, NonpositiveScalar,
                           ParseError, UnboundedBelowDetected, UnknownAtom)
from sqckit.geometry import Interval, SpaceSpec, parse_domain
from sqckit.serialize import deserialize, from_dict, serialize

X2 = E.Poly1D((0.0, 0.0, 1.0))


def test_norm_eval():
    assert E.Norm(SpaceSpec(2))([3.0, 4.0]) == 5.0
    assert E.Norm(SpaceSpec(2, math.inf))([3.0, -4.0]) == 4.0


def test_quad_dip_eval():
    q = E.QuadDip()
    assert q(0.0) == -1.0
    assert q(2.0) == 4.0
    assert q(1e-300) == 1e-600 or q(1e-300) == 0.0  # underflows but is not the override


def test_piecewise_override_exact_equality():
    f = E.Piecewise1D((0.0,), (None, X2), ((0.0, 1.0),))
    assert f(0.0) == 1.0
    assert f(5e-324) == 0.0
    assert f(-1e-9) == math.inf
    assert f(3.0) == 9.0


def test_infconv_of_parabolas():
    ic = E.InfConv(X2, X2, E.InnerSearch(parse_domain("interval:-10:10")))
    assert abs(ic(2.0) - 2.0) < 1e-12


def test_sum_of_dips():
    q = E.QuadDip()
    g = E.Sum((E.Shift([1.0], q), E.Shift([-1.0], q)))
    assert g(-1.0) == 3.0 and g(1.0) == 3.0
    assert g(0.0) == 2.0
    assert g(0.5) == 2.0 * (0.25 + 1.0)


def test_value_functions():
    sv = E.SupValue(E.Separable(E.Linear1D(0.0, 0.0), E.Abs1D()),
                    E.ProductSlice(parse_domain("interval:-1:1"), 1, C=[[1.0]]))
    assert abs(sv(0.5) - 1.5) < 1e-9
    mm = E.MarginalMin(E.Separable(X2, X2), E.ProductSlice(parse_domain("interval:-1:1"), 1))
    assert abs(mm(0.7) - 0.49) < 1e-12
    vf = E.ValueFn(E.QuadDip(), E.AffinePreimage([[3.0]], [0.0]))
    assert vf(3.0) == 1.0 and vf(0.0) == -1.0


def test_unbounded_inner_search_detected():
    ic = E.InfConv(E.Linear1D(), X2, E.InnerSearch(parse_domain("interval:-1:1"), truncated=True))
    with pytest.raises(UnboundedBelowDetected):
        ic(30.0)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        E.Norm(SpaceSpec(2)).evaluate(np.zeros((3, 3)))


def test_constructor_errors():
    with pytest.raises(NonpositiveScalar):
        E.Scale(-1.0, X2)
    with pytest.raises(EmptyFamily):
        E.Sup(())
    with pytest.raises(InvalidConstant):
        E.Poly1D((0.0, 1.0), sigma=-1.0)


class _NanAtom(E.Expr):
    kind = "nan_atom"

    def _eval(self, X):
        return np.full(X.shape[0], math.nan)


def test_evaluate_rejects_nan():
    with pytest.raises(EvaluationError):
        E.evaluate(_NanAtom(), [0.0])
    with pytest.raises(InvalidConstant):
        E.Table1D((0.0, 1.0), (0.0, math.nan))


def test_serialize_canonical():
    e = E.Scale(2.0, E.Norm(SpaceSpec(3)))
    text = serialize(e)
    assert text == json.dumps(json.loads(text), sort_keys=True)
    assert serialize(deserialize(text)) == text
    assert deserialize(text)([1.0, 2.0, 2.0]) == 6.0


def test_deserialize_invalid_scale():
    with pytest.raises(InvalidConstant):
        deserialize('{"kind": "scale", "c": -1, "child": {"kind": "abs1d"}}')


def test_parse_error_location():
    with pytest.raises(ParseError) as ei:
        deserialize('{"kind": "max", "children": [{"kind": "abs1d"}, {"kind": "nope"}]}')
    assert isinstance(ei.value, UnknownAtom)
    assert "$.children[1]" in str(ei.value.location)
    with pytest.raises(ParseError):
        deserialize("{not json")


def test_corpus_sum_fixture_is_g():
    from sqckit.corpus import FIXTURE_DIR

    g = deserialize((FIXTURE_DIR / "ex_6_3.json").read_text() and json.dumps(
        json.loads((FIXTURE_DIR / "ex_6_3.json").read_text())["expr"]))
    assert g(1.0) == 3.0 and g(0.5) == 2.5


ALL = [
    E.Norm(SpaceSpec(2, 4.0)), E.PowerNorm(SpaceSpec(1), 0.5), E.QuadDip(sigma=2.0), E.Abs1D(),
    E.Linear1D(2.0, -1.0), E.Table1D((0.0, 1.0, 2.0), (1.0, 0.0, 1.0)),
    E.Piecewise1D((0.0,), (None, X2), ((0.0, 1.0),)),
    E.AddConstant(1.5, E.Abs1D()), E.MaxFinite((X2, E.Abs1D())), E.Min((X2, E.Abs1D())),
    E.ComposeMonotone(X2, E.Linear1D(1.0, 1.0), ell=1.0, outer_interval=(1.0, 3.0)),
    E.AffinePre([[2.0]], [1.0], E.Abs1D(), gamma=0.5),
    E.Restrict(E.Norm(SpaceSpec(2)), [0.0, 1.0], [0.6, 0.8], True),
    E.ValueFn(E.QuadDip(), E.AffinePreimage([[3.0]], [0.0])),
    E.InfConv(X2, X2, E.InnerSearch(parse_domain("interval:-5:5"), grid=257)),
]


@pytest.mark.parametrize("e", ALL, ids=lambda e: e.kind)
def test_roundtrip_evaluates_identically(e):
    back = from_dict(json.loads(serialize(e)))
    assert serialize(back) == serialize(e)
    X = np.linspace(-0.9, 0.9, 37).reshape(-1, 1)
    if e.dim == 2:
        X = np.column_stack([X[:, 0], X[::-1, 0]])
    a, b = e.evaluate(X), back.evaluate(X)
    assert np.array_equal(a, b)
    assert not np.any(a == -math.inf)

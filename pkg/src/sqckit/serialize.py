"""Canonical JSON for expressions.

Keys are sorted and ``+inf`` is written as the string ``"inf"`` so the text
is strict JSON and byte-reproducible.
"""
from __future__ import annotations

import json
import math

import numpy as np

from . import expr as E
from .errors import InvalidConstant, ParseError, SpecSyntax, SqcError, UnknownAtom
from .geometry import SpaceSpec, parse_domain, parse_p
from .spaces import body_from_dict


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if v == math.inf:
            return "inf"
        if v == -math.inf or math.isnan(v):
            raise ValueError("cannot serialize -inf or NaN")
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj, indent: int | None = None) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=indent, allow_nan=False)


def serialize(e: E.Expr, indent: int | None = None) -> str:
    return dumps(e.to_dict(), indent=indent)


# ---------------------------------------------------------------- parsing


class _Ctx:
    def __init__(self, d, path):
        if not isinstance(d, dict):
            raise ParseError("expected an object", path)
        self.d = d
        self.path = path

    def at(self, key):
        return f"{self.path}.{key}"

    def get(self, key, default=...):
        if key not in self.d:
            if default is ...:
                raise ParseError(f"missing field {key!r}", self.path)
            return default
        return self.d[key]

    def num(self, key, default=...):
        v = self.get(key, default)
        if v is None or v is default and default is not ...:
            return v
        return _num(v, self.at(key))

    def nums(self, key, default=...):
        v = self.get(key, default)
        if v is None:
            return None
        try:
            return np.array([_num(t, f"{self.at(key)}[{i}]") for i, t in enumerate(_flat(v))],
                            dtype=np.float64).reshape(np.shape(v))
        except TypeError:
            raise ParseError("expected numbers", self.at(key)) from None


def _flat(v):
    if isinstance(v, (list, tuple)):
        for t in v:
            yield from _flat(t)
    else:
        yield v


def _num(v, path):
    if isinstance(v, bool):
        raise ParseError("expected a number, got a boolean", path)
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    raise ParseError(f"expected a number, got {v!r}", path)


def _domain(spec, path):
    if not isinstance(spec, str):
        raise ParseError("domain must be a spec string", path)
    try:
        return parse_domain(spec)
    except SpecSyntax as exc:
        raise ParseError(str(exc), path) from None


def _space(c: _Ctx):
    try:
        return SpaceSpec(int(c.get("dim")), parse_p(c.get("p", 2.0)))
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), c.path) from None


def _search(c: _Ctx):
    dom = _domain(c.get("inner_domain"), c.at("inner_domain"))
    grid = c.get("grid", None)
    steps = c.get("steps", E.GOLDEN_STEPS)
    tol = c.num("inner_tol", None)
    return E.InnerSearch(dom, None if grid is None else int(grid), int(steps), tol)


def _map(d, path, in_dim_hint=None):
    c = _Ctx(d, path)
    kind = c.get("kind")
    gamma, ell = c.num("gamma", None), c.num("ell", None)
    if kind == "affine_graph":
        return E.AffineGraph(np.atleast_2d(c.nums("A")), c.nums("b"), gamma, ell)
    if kind == "affine_preimage":
        return E.AffinePreimage(np.atleast_2d(c.nums("A")), c.nums("b"), gamma, ell)
    if kind == "sum_split":
        return E.SumSplit(int(c.get("dim", 1)), gamma, ell)
    if kind == "product_slice":
        C = c.get("C", None)
        return E.ProductSlice(_domain(c.get("inner_domain"), c.at("inner_domain")),
                              int(c.get("in_dim", 1)),
                              None if C is None else np.atleast_2d(c.nums("C")), gamma, ell)
    raise UnknownAtom(f"unknown map descriptor {kind!r}", c.at("kind"))


def _children(c: _Ctx, key="children"):
    items = c.get(key)
    if not isinstance(items, list):
        raise ParseError("expected a list of expressions", c.at(key))
    return tuple(from_dict(v, f"{c.at(key)}[{i}]") for i, v in enumerate(items))


def _decl(c: _Ctx):
    conv = c.get("convex", None)
    return {"sigma": c.num("sigma", None), "convex": None if conv is None else bool(conv)}


def _build(c: _Ctx) -> E.Expr:
    kind = c.get("kind")
    sub = lambda key: from_dict(c.get(key), c.at(key))  # noqa: E731
    if kind == "norm":
        return E.Norm(_space(c), **_decl(c))
    if kind == "power_norm":
        return E.PowerNorm(_space(c), c.num("a"), **_decl(c))
    if kind == "gauge":
        try:
            body = body_from_dict(c.get("body"))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SqcError):
                raise
            raise ParseError(str(exc), c.at("body")) from None
        return E.Gauge(body, **_decl(c))
    if kind == "poly1d":
        return E.Poly1D(tuple(c.nums("coefficients")), **_decl(c))
    if kind == "abs1d":
        return E.Abs1D(**_decl(c))
    if kind == "linear1d":
        return E.Linear1D(c.num("slope", 1.0), c.num("intercept", 0.0), **_decl(c))
    if kind == "quad_dip":
        return E.QuadDip(**_decl(c))
    if kind == "piecewise1d":
        pieces = c.get("pieces")
        if not isinstance(pieces, list):
            raise ParseError("expected a list", c.at("pieces"))
        parsed = tuple(None if p is None else from_dict(p, f"{c.at('pieces')}[{i}]")
                       for i, p in enumerate(pieces))
        ovs = []
        for i, o in enumerate(c.get("overrides", [])):
            oc = _Ctx(o, f"{c.at('overrides')}[{i}]")
            ovs.append((oc.num("x"), oc.num("value")))
        return E.Piecewise1D(tuple(c.nums("breakpoints").tolist()), parsed, tuple(ovs), **_decl(c))
    if kind == "table1d":
        return E.Table1D(tuple(c.nums("grid")), tuple(c.nums("values")), **_decl(c))
    if kind == "scale":
        return E.Scale(c.num("c"), sub("child"))
    if kind == "add_constant":
        return E.AddConstant(c.num("k"), sub("child"))
    if kind == "compose":
        oi = c.get("outer_interval", None)
        return E.ComposeMonotone(sub("outer"), sub("inner"), c.num("ell", None),
                                 None if oi is None else tuple(c.nums("outer_interval")))
    if kind == "sup":
        return E.Sup(_children(c))
    if kind == "max":
        return E.MaxFinite(_children(c))
    if kind == "min":
        return E.Min(_children(c))
    if kind == "sum":
        return E.Sum(_children(c))
    if kind == "affine_pre":
        return E.AffinePre(np.atleast_2d(c.nums("A")), c.nums("b"), sub("child"), c.num("gamma", None))
    if kind == "shift":
        return E.Shift(np.atleast_1d(c.nums("offset")), sub("child"))
    if kind == "restrict":
        return E.Restrict(sub("child"), c.nums("u"), c.nums("x"), bool(c.get("unit_speed", False)),
                          parse_p(c.get("p", 2.0)))
    if kind == "separable_sum":
        return E.Separable(sub("left"), sub("right"))
    if kind == "infconv":
        return E.InfConv(sub("left"), sub("right"), _search(c), c.num("joint_sigma", None))
    if kind == "value_fn":
        m = _map(c.get("map"), c.at("map"))
        search = _search(c) if "inner_domain" in c.d else None
        return E.ValueFn(sub("child"), m, search)
    if kind in ("marginal_min", "sup_value"):
        cls = E.MarginalMin if kind == "marginal_min" else E.SupValue
        m = _map(c.get("map"), c.at("map"))
        grid = c.get("grid", None)
        return cls(sub("joint"), m, parse_p(c.get("product_p", 2.0)), c.num("joint_sigma", None),
                   None if grid is None else int(grid), int(c.get("steps", E.GOLDEN_STEPS)),
                   c.num("inner_tol", None))
    raise UnknownAtom(f"unknown expression kind {kind!r}", c.at("kind"))


def from_dict(d, path: str = "$") -> E.Expr:
    c = _Ctx(d, path)
    try:
        return _build(c)
    except (ParseError, InvalidConstant):
        raise
    except SqcError as exc:
        raise ParseError(str(exc), path) from exc
    except (TypeError, ValueError, KeyError) as exc:
        raise ParseError(f"{type(exc).__name__}: {exc}", path) from None


def deserialize(text: str) -> E.Expr:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from None
    return from_dict(d)


def load(path) -> E.Expr:
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())

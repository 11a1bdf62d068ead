"""Regenerate the fixture files.

Expected sigma values that come from the 1-D oracle or the sampled
estimator are computed here and pinned into the JSON with a tolerance, so
the shipped files record ground truth rather than hand-typed constants.

Run with ``python -m sqckit.corpus.build``.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .. import expr as E
from ..certify import Triple, estimate_sigma, oracle_sigma_1d
from ..geometry import SpaceSpec, parse_domain
from ..serialize import dumps
from ..spaces import PNormBall

FIXTURE_DIR = Path(__file__).parent / "fixtures"
ORACLE_GRID = 8193
PIN_BUDGET = 100_000
PIN_SEED = 0


def _oracle(f, spec, tol=0.05):
    r = oracle_sigma_1d(f, parse_domain(spec), ORACLE_GRID)
    return {"value": round(r.sigma_hat, 6), "tol": tol, "grid_n": ORACLE_GRID}


def _estimate(f, spec, tol=0.05):
    r = estimate_sigma(f, parse_domain(spec), PIN_BUDGET, PIN_SEED)
    return {"value": round(r.sigma_hat, 6), "tol": tol}


def _triple(x, y, lam):
    return Triple(np.atleast_1d(x), np.atleast_1d(y), lam).to_dict()


def fixtures() -> list[dict]:
    x2 = E.Poly1D((0.0, 0.0, 1.0))
    x2d = E.Poly1D((0.0, 0.0, 1.0), sigma=2.0)
    qd = E.QuadDip()
    lin = E.Linear1D()
    r2 = SpaceSpec(2)
    out = []

    # ---- counterexamples
    out.append({
        "id": "ex_6_1",
        "title": "quadratic with a dip at the origin",
        "expr": qd.to_dict(), "domain": "interval:-10:10", "lsc": True,
        "expected": {
            "quasiconvex": True,
            "sigma_oracle": _oracle(qd, "interval:-10:10"),
            "holds": [{"sigma": 1.95}],
            "refute": [{"sigma": 4.0, "domain": "interval:-5:5",
                        "witness": _triple(-5.0, 5.0, 0.5)}],
            "certificate": {"kind": "estimated", "sigma": 2.0, "tol": 0.05},
            "min": {"point": [0.0], "value": -1.0, "tol": 1e-6, "clusters": 1, "domain": "interval:-5:5"},
            "prox": [{"v": [3.0], "points": [[1.0]], "value": 3.0, "tol": 1e-6},
                     {"v": [0.0], "points": [[0.0]], "value": -1.0, "tol": 1e-6}],
            "growth": [{"sigma": 2.0, "xbar": [0.0], "passes": True},
                       {"sigma": 8.0, "xbar": [0.0], "passes": False}],
            "coercive": {"order": 2, "radii": [10.0, 50.0, 100.0], "verdict": "positive-liminf-on-range",
                         "inf_range": [0.9, 1.1]},
        },
        "notes": [{"flag": "sigma-constant", "claimed": 4.0,
                   "observed": "oracle sigma 2; sigma 4 refuted by (-5, 5, 1/2)"}],
    })

    out.append({
        "id": "ex_6_2",
        "title": "identity map: locally but not globally strongly quasiconvex",
        "expr": lin.to_dict(), "domain": "interval:0:1", "lsc": True,
        "expected": {
            "quasiconvex": True,
            "sigma_oracle": _oracle(lin, "interval:0:1"),
            "holds": [{"sigma": 2.0}],
            "refute": [{"sigma": 2.0, "domain": "interval:-2:2",
                        "witness": {**_triple(-2.0, 2.0, 0.5), "margin": 2.0}}]
            + [{"sigma": s, "domain": f"interval:{-2.0 / s!r}:{2.0 / s!r}"} for s in (1.0, 0.1, 0.01)],
            "coercive": {"order": 1, "radii": [10.0, 100.0], "verdict": "negative"},
        },
        "notes": [],
    })

    g = E.Sum((E.Shift([1.0], qd), E.Shift([-1.0], qd)))
    lam63 = (1.0 - math.sqrt(3.0) / 2.0) / 2.0
    out.append({
        "id": "ex_6_3",
        "title": "sum of two shifted dips is not quasiconvex",
        "expr": g.to_dict(), "domain": "interval:-2:2", "lsc": True,
        "expected": {
            "quasiconvex": False,
            "witness_hint": _triple(-1.0, 1.0, lam63),
            "witness": {**_triple(-1.0, 1.0, lam63), "defect": -0.5},
            "certificate": {"error": "NoCalculusRule"},
        },
        "notes": [],
    })

    f64 = E.Piecewise1D((0.0,), (None, x2), ((0.0, 1.0),))
    out.append({
        "id": "ex_6_4",
        "title": "strongly quasiconvex, not lower semicontinuous, no minimum",
        "expr": f64.to_dict(), "domain": "interval:0:10", "lsc": False,
        "expected": {
            "quasiconvex": True,
            "sigma_oracle": _oracle(f64, "interval:0:10"),
            "min": {"attainment_suspect": True},
            "prox": [{"v": [0.0], "empty": True}],
        },
        "notes": [{"flag": "lsc-wording", "claimed": "lsc",
                   "observed": "lsc = false: f(0) = 1 exceeds the limit 0 from the right"},
                  {"flag": "sigma-constant", "claimed": 4.0,
                   "observed": "oracle value pinned under sigma_oracle"}],
    })

    mp = E.Min((E.Poly1D((1.0, -2.0, 1.0)), E.Poly1D((1.0, 2.0, 1.0))))
    out.append({
        "id": "min_parabolas",
        "title": "pointwise minimum of separated parabolas",
        "expr": mp.to_dict(), "domain": "interval:-2:2", "lsc": True,
        "expected": {
            "quasiconvex": False,
            "witness": {**_triple(-1.0, 1.0, 0.5), "margin": 1.0},
            "certificate": {"error": "NoCalculusRule"},
        },
        "notes": [{"flag": "min-wording", "claimed": "min",
                   "observed": "implemented as max; min refuted by (-1, 1, 1/2)"}],
    })

    # ---- norms
    for rid, r, n in (("norm_ball_r1", 1.0, 2), ("norm_ball_r2", 2.0, 2), ("norm_ball_r1_R8", 1.0, 8)):
        sp = SpaceSpec(n)
        c = ",".join(["0"] * n)
        dom = f"ball:{c}:{r!r}"
        out.append({
            "id": rid,
            "title": f"Euclidean norm on the radius-{r:g} ball in R^{n}",
            "expr": E.Norm(sp).to_dict(), "domain": dom, "lsc": True,
            "expected": {
                "quasiconvex": True,
                "sigma_analytic": 1.0 / r,
                "sigma_estimate": {"range": [0.95 / r, 1.1 / r]},
                "certificate": {"kind": "derived", "sigma": 1.0 / r, "tol": 0.0},
                "holds": [{"sigma": 0.5 / r}],
                "min": {"point": [0.0] * n, "value": 0.0, "tol": 1e-6, "clusters": 1},
                "growth": [{"sigma": 0.5 / r, "xbar": [0.0] * n, "passes": True}],
            },
            "notes": [],
        })

    out.append({
        "id": "norm_l4",
        "title": "l4 norm on the unit ball in R^2",
        "expr": E.Norm(SpaceSpec(2, 4.0)).to_dict(), "domain": "ball:0,0:1@p=4", "lsc": True,
        "expected": {
            "quasiconvex": True,
            "certificate": {"kind": "derived", "sigma": 0.0, "tol": 0.0},
            "scaling": {"eps": [0.2, 0.02], "ratio_range": [30.0, 300.0]},
            "min": {"point": [0.0, 0.0], "value": 0.0, "tol": 1e-6, "clusters": 1},
        },
        "notes": [],
    })

    # ---- calculus positives (derived certificates)
    th = 0.3
    rot = [[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]]
    derived = [
        ("scale", "positive multiple", E.Scale(3.0, x2d), "interval:-3:3", 6.0),
        ("compose", "nondecreasing outer after a convex inner",
         E.ComposeMonotone(x2d, E.Linear1D(1.0, 1.0), ell=1.0, outer_interval=(1.0, 3.0)), "interval:0:2", 2.0),
        ("sup_shifted", "maximum of two shifted parabolas",
         E.MaxFinite((E.Shift([1.0], x2d), E.Shift([-1.0], x2d))), "interval:-2:2", 2.0),
        ("affine_preimage", "dip composed with x / 3",
         E.ValueFn(E.QuadDip(sigma=2.0), E.AffinePreimage([[3.0]], [0.0])), "interval:-5:5", 2.0 / 9.0),
        ("marginal_min", "minimum over a slice of a separable joint",
         E.MarginalMin(E.Separable(x2, x2), E.ProductSlice(parse_domain("interval:-1:1"), 1), joint_sigma=2.0),
         "interval:-2:2", 2.0),
        ("sqrt_abs", "square root of the absolute value",
         E.PowerNorm(SpaceSpec(1), 0.5), "interval:-1:1", 0.5),
        ("rotation", "Euclidean norm after a rotation",
         E.AffinePre(rot, [0.0, 0.0], E.Norm(r2, sigma=0.5), gamma=1.0), "ball:0,0:1", 0.5),
        ("restrict", "Euclidean norm along a unit-speed segment",
         E.Restrict(E.Norm(r2), [0.0, 1.0], [0.6, 0.8], True), f"interval:0:{math.hypot(0.6, 0.2)!r}", 1.0),
    ]
    for fid, title, f, dom, sig in derived:
        exp = {"quasiconvex": True,
               "certificate": {"kind": "derived", "sigma": sig, "tol": 1e-12},
               "holds": [{"sigma": sig}]}
        if f.dim == 1:
            exp["sigma_oracle"] = {**_oracle(f, dom), "at_least": sig}
        out.append({"id": fid, "title": title, "expr": f.to_dict(), "domain": dom, "lsc": True,
                    "expected": exp, "notes": []})

    # ---- estimated joints
    ic = E.InfConv(x2, x2, E.InnerSearch(parse_domain("interval:-10:10")))
    out.append({
        "id": "infconv",
        "title": "infimal convolution of two parabolas",
        "expr": ic.to_dict(), "domain": "interval:-2:2", "lsc": True,
        "expected": {"quasiconvex": True, "sigma_oracle": _oracle(ic, "interval:-2:2"),
                     "certificate": {"kind": "estimated"},
                     "min": {"point": [0.0], "value": 0.0, "tol": 1e-6, "clusters": 1}},
        "notes": [],
    })
    sv = E.SupValue(E.Separable(x2, E.Linear1D(1.0, 0.0)),
                    E.ProductSlice(parse_domain("interval:-1:1"), 1, C=[[0.5]]))
    out.append({
        "id": "sup_value",
        "title": "supremum over an affine slice",
        "expr": sv.to_dict(), "domain": "interval:-2:2", "lsc": True,
        "expected": {"quasiconvex": True, "sigma_oracle": _oracle(sv, "interval:-2:2"),
                     "certificate": {"kind": "estimated"}},
        "notes": [],
    })
    gauge = E.Gauge(PNormBall(r2, 1.0))
    out.append({
        "id": "gauge_euclid",
        "title": "gauge of the Euclidean unit ball",
        "expr": gauge.to_dict(), "domain": "ball:0,0:1", "lsc": True,
        "expected": {"quasiconvex": True, "sigma_estimate": _estimate(gauge, "ball:0,0:1"),
                     "certificate": {"kind": "estimated"}},
        "notes": [],
    })
    return out


def write(directory: Path = FIXTURE_DIR) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for fx in fixtures():
        p = directory / f"{fx['id']}.json"
        p.write_text(dumps(fx, indent=2) + "\n", encoding="utf-8")
        paths.append(p)
    return paths


if __name__ == "__main__":
    for p in write():
        print(p.name)

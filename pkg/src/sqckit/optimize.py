"""Minimization on compact regions, quadratic growth, supercoercivity and prox.

The local solver is a lockstep compass search: every start moves along
coordinate (and, in low dimension, diagonal) directions with a shared step
schedule, so results depend only on the start list and not on timing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from .errors import EmptyShell, NoFiniteValueFound
from .geometry import Ball, ConvexDomain, SpaceSpec, pnorm

DEFAULT_STARTS = 16
MAX_ITERS = 4000
REFINEMENTS = 3


def _directions(n: int) -> np.ndarray:
    eye = np.eye(n)
    dirs = [eye, -eye]
    if 1 < n <= 4:
        for i in range(n):
            for j in range(i + 1, n):
                for si in (1.0, -1.0):
                    for sj in (1.0, -1.0):
                        v = np.zeros(n)
                        v[i], v[j] = si, sj
                        dirs.append((v / math.sqrt(2.0))[None, :])
    return np.vstack(dirs)


def _values(f, X):
    v = np.asarray(f.evaluate(X), dtype=np.float64)
    return np.where(np.isnan(v), np.inf, v)


def pattern_search(f: E.Expr, domain: ConvexDomain, X0: np.ndarray, tol: float,
                   step0: float | None = None, max_iters: int = MAX_ITERS):
    """Run compass search from every row of ``X0``; returns ``(X, F)``."""
    X = domain.project(np.array(X0, dtype=np.float64, copy=True))
    F = _values(f, X)
    m, n = X.shape
    D = _directions(n)
    step = np.full(m, step0 if step0 is not None else max(domain.diameter() / 4.0, tol))
    for _ in range(max_iters):
        act = np.flatnonzero(step > tol)
        if act.size == 0:
            break
        C = X[act, None, :] + step[act, None, None] * D[None, :, :]
        C = domain.project(C.reshape(-1, n)).reshape(act.size, D.shape[0], n)
        V = _values(f, C.reshape(-1, n)).reshape(act.size, D.shape[0])
        k = np.argmin(V, axis=1)
        best = V[np.arange(act.size), k]
        better = best < F[act]
        mv = act[better]
        X[mv] = C[better, k[better]]
        F[mv] = best[better]
        step[act[~better]] *= 0.5
    return X, F


@dataclass
class MinimizeResult:
    argmin: np.ndarray
    value: float
    starts_converged: int
    distinct_local_minima: list
    sublevel_bound: float
    attainment_suspect: bool = False
    trend: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"argmin": self.argmin.tolist(), "value": self.value,
                "starts_converged": self.starts_converged,
                "distinct_local_minima": [{"point": p.tolist(), "value": v}
                                          for p, v in self.distinct_local_minima],
                "sublevel_bound": self.sublevel_bound,
                "attainment_suspect": self.attainment_suspect, "trend": list(self.trend)}


def _start_points(f, domain, starts, seed):
    rng = np.random.default_rng(seed)
    parts = [domain.anchors()]
    sp = f.special_points()
    if len(sp):
        sp = sp[domain.contains(sp)]
        parts.append(sp)
    parts.append(domain.sample_uniform(rng, int(starts)))
    return np.vstack(parts)


def _snap(f, domain, X, F, tol):
    """Move converged points onto nearby anchors or special points that do better.

    Override values sit on single points that a step-halving search cannot
    land on by chance.
    """
    cand = [domain.anchors()]
    sp = f.special_points()
    if len(sp):
        cand.append(sp[domain.contains(sp)])
    Q = np.vstack(cand)
    if Q.size == 0:
        return X, F
    fq = _values(f, Q)
    rad = max(1e4 * tol, 1e-6)
    space = domain.space
    for i in range(X.shape[0]):
        d = space.norms(Q - X[i])
        ok = np.flatnonzero((d <= rad) & (fq < F[i]))
        if ok.size:
            j = ok[np.argmin(fq[ok])]
            X[i], F[i] = Q[j], fq[j]
    return X, F


def _clusters(X, F, space, tol):
    order = np.lexsort((np.arange(len(F)), F))
    reps = []
    for i in order:
        if not np.isfinite(F[i]):
            continue
        for r in reps:
            if space.norm(X[i] - r[0]) <= 10 * tol and abs(F[i] - r[1]) <= 100 * tol:
                break
        else:
            reps.append((X[i].copy(), float(F[i])))
    return reps


def _attainment_trend(f, domain, x, v, tol):
    """Probe toward nearby irregular points ``q`` with ``f(q) > v``.

    Returns the trend values if ``f`` keeps strictly decreasing on the
    approach over ``REFINEMENTS`` successive tenfold refinements.
    """
    cand = [domain.anchors()]
    sp = f.special_points()
    if len(sp):
        cand.append(sp)
    Q = np.vstack(cand)
    rad = max(1e4 * tol, 1e-6)
    space = domain.space
    for q in Q:
        d = x - q
        if not 0 < space.norm(d) <= rad:
            continue
        fq = f(q)
        if not fq > v:
            continue
        pts = np.array([q + d / 10.0 ** k for k in range(REFINEMENTS + 1)])
        vals = _values(f, pts)
        if np.all(np.isfinite(vals)) and np.all(np.diff(vals) < 0) and vals[-1] < fq:
            return [float(t) for t in vals]
    return []


def minimize(f: E.Expr, domain: ConvexDomain, starts: int = DEFAULT_STARTS, tol: float = 1e-8,
             seed: int = 0) -> MinimizeResult:
    """Multi-start compass search on a compact convex region.

    ``distinct_local_minima`` lists every cluster of converged starts; more
    than one cluster means uniqueness failed. ``attainment_suspect`` flags a
    best value that keeps dropping toward an irregular point where ``f`` is
    larger, the numerical sign that the infimum is not attained.
    """
    if f.dim != domain.dim:
        from .errors import DimensionMismatch

        raise DimensionMismatch(f"function lives in R^{f.dim}, domain in R^{domain.dim}")
    X0 = _start_points(f, domain, starts, seed)
    F0 = _values(f, X0)
    if not np.any(np.isfinite(F0)):
        rng = np.random.default_rng(seed + 1)
        extra = domain.sample_uniform(rng, 4096)
        fe = _values(f, extra)
        if not np.any(np.isfinite(fe)):
            raise NoFiniteValueFound("f is +inf at every sampled point")
        X0 = np.vstack([X0, extra[np.isfinite(fe)][:starts]])
    X, F = pattern_search(f, domain, X0, tol)
    X, F = _snap(f, domain, X, F, tol)
    conv = int(np.sum(np.isfinite(F)))
    if conv == 0:
        raise NoFiniteValueFound("no start reached a finite value")
    reps = _clusters(X, F, domain.space, tol)
    x, v = reps[0]
    trend = _attainment_trend(f, domain, x, v, tol)
    return MinimizeResult(x, v, conv, reps, float(domain.max_norm()), bool(trend), trend)


# ---------------------------------------------------------------- growth


@dataclass
class GrowthReport:
    sigma: float
    xbar: np.ndarray
    fxbar: float
    violations: list
    samples: int
    weak_violations: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def reverify(self, f) -> bool:
        return all(f(y) < b for y, _, b in self.violations)

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "xbar": self.xbar.tolist(), "f_xbar": self.fxbar,
                "samples": self.samples, "passed": self.passed,
                "weak_bound_violations": self.weak_violations,
                "violations": [{"y": y.tolist(), "f_y": fy, "bound": b} for y, fy, b in self.violations]}


def quadratic_growth_check(f: E.Expr, xbar, sigma: float, domain: ConvexDomain,
                           samples: int = 10_000, seed: int = 0, tol: float = 1e-9,
                           max_report: int = 100) -> GrowthReport:
    """Check ``f(y) >= f(xbar) + (sigma/4)|y - xbar|^2`` on sampled ``y``.

    The weaker ``sigma/8`` bound is counted separately as a sanity check.
    """
    xbar = np.asarray(xbar, dtype=np.float64).reshape(-1)
    rng = np.random.default_rng(seed)
    nb = samples // 4
    Y = np.vstack([domain.sample_uniform(rng, samples - nb), domain.sample_boundary(rng, nb)])
    Y = np.vstack([Y, domain.anchors()])[:max(samples, 1)]
    fx = f(xbar)
    fy = _values(f, Y)
    r2 = domain.space.norms(Y - xbar) ** 2
    slack = tol * (1.0 + abs(fx))
    bound = fx + 0.25 * sigma * r2
    bad = np.flatnonzero(fy < bound - slack)
    weak = int(np.sum(fy < fx + 0.125 * sigma * r2 - slack))
    viol = [(Y[i].copy(), float(fy[i]), float(bound[i])) for i in bad[:max_report]]
    return GrowthReport(float(sigma), xbar, float(fx), viol, int(Y.shape[0]), weak)


# ---------------------------------------------------------------- supercoercivity


@dataclass
class CoercivityProfile:
    n: int
    radii: list
    inf_ratio_per_radius: list
    verdict: str
    points: list
    shell_bound_ok: bool | None = None

    def recompute(self, f) -> list:
        out = []
        for R, P in zip(self.radii, self.points):
            v = _values(f, P)
            out.append(float(np.min(v[np.isfinite(v)] / R ** self.n)))
        return out

    def to_dict(self) -> dict:
        return {"order": self.n, "radii": list(self.radii),
                "inf_ratio_per_radius": list(self.inf_ratio_per_radius),
                "verdict": self.verdict, "shell_bound_ok": self.shell_bound_ok}


def _sphere(rng, n, p, R, m):
    eye = np.eye(n)
    G = rng.standard_normal((m, n))
    V = np.vstack([eye, -eye, G])
    return R * V / pnorm(V, p)[:, None]


def _verdict(inf):
    inf = np.asarray(inf)
    if inf[-1] <= 0 or np.any(inf < 0):
        return "negative"
    tail = inf[len(inf) // 2:] if len(inf) > 2 else inf
    if np.all(tail > 0) and np.all(np.diff(tail) >= -1e-2 * np.abs(tail[:-1])):
        return "positive-liminf-on-range"
    return "inconclusive"


def supercoercivity_profile(f: E.Expr, x0=None, n: int = 2, radii=(10.0, 50.0, 100.0),
                            samples_per_radius: int = 256, seed: int = 0, sigma: float | None = None,
                            p: float = 2.0) -> CoercivityProfile:
    """Infimum of ``f(x)/|x|^n`` over sampled spheres ``|x| = R``.

    Points where ``f = +inf`` are outside the function's domain and are
    dropped. With a certified ``sigma`` the outermost shell is also checked
    against ``f(x0) + (sigma/8)|y - x0|^2``.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 2 or any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] <= 0:
        raise ValueError("radii must be positive and strictly increasing, at least two values")
    if n not in (1, 2):
        raise ValueError("order must be 1 or 2")
    rng = np.random.default_rng(seed)
    dim = f.dim
    space = SpaceSpec(dim, p)
    infs, pts = [], []
    for R in radii:
        P = _sphere(rng, dim, p, R, samples_per_radius)
        v = _values(f, P)
        keep = np.isfinite(v)
        if not keep.any():
            raise EmptyShell(f"f is +inf on the whole sampled sphere of radius {R}")
        pts.append(P[keep])
        infs.append(float(np.min(v[keep] / R ** n)))
    shell_ok = None
    if sigma is not None:
        x0 = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=np.float64).reshape(-1)
        P = pts[-1]
        bound = f(x0) + 0.125 * sigma * space.norms(P - x0) ** 2
        shell_ok = bool(np.all(_values(f, P) >= bound - 1e-9 * (1 + np.abs(bound))))
    return CoercivityProfile(n, radii, infs, _verdict(infs), pts, shell_ok)


# ---------------------------------------------------------------- prox


@dataclass(frozen=True, eq=False, repr=False)
class ProxObjective(E.Expr):
    """``x -> f(x) + |x - v|^2 / 2`` (Euclidean)."""

    f: E.Expr
    v: np.ndarray
    kind = "prox_objective"

    @property
    def dim(self):
        return self.f.dim

    def _eval(self, X):
        return self.f.evaluate(X) + 0.5 * np.sum((X - self.v) ** 2, axis=1)

    def special_points(self):
        return E._cat_points([self.f.special_points(), self.v.reshape(1, -1)], self.dim)

    def to_dict(self):
        return {"kind": self.kind, "f": self.f.to_dict(), "v": self.v.tolist()}


@dataclass
class ProxResult:
    points: list
    value: float
    empty: bool
    attainment_suspect: bool
    radius: float
    minimize: MinimizeResult

    def to_dict(self) -> dict:
        return {"points": [p.tolist() for p in self.points], "value": self.value, "empty": self.empty,
                "attainment_suspect": self.attainment_suspect, "search_radius": self.radius,
                "trend": self.minimize.trend}


def default_prox_radius(f: E.Expr, v) -> float:
    fv = f(v)
    if not np.isfinite(fv):
        return 8.0
    return max(8.0, 8.0 * (1.0 + abs(fv)))


def prox(f: E.Expr, v, search_domain: ConvexDomain | None = None, tol: float = 1e-8, seed: int = 0,
         certified: bool = False, starts: int = DEFAULT_STARTS) -> ProxResult:
    """Minimizers of ``f(x) + |x - v|^2 / 2``.

    Without ``search_domain`` the Euclidean ball around ``v`` of radius
    ``max(8, 8(1 + |f(v)|))`` is used, which is only justified when ``f``
    carries a positive sigma certificate (``certified=True``). The result is
    empty when the infimum looks unattained.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != f.dim:
        from .errors import DimensionMismatch

        raise DimensionMismatch(f"v has dimension {v.shape[0]}, f lives in R^{f.dim}")
    if search_domain is None:
        if not certified:
            raise ValueError("an explicit search domain is required for an uncertified function")
        search_domain = Ball(v, default_prox_radius(f, v), SpaceSpec(f.dim))
    g = ProxObjective(f, v)
    res = minimize(g, search_domain, starts=starts, tol=tol, seed=seed)
    radius = float(search_domain.diameter() / 2.0)
    if res.attainment_suspect:
        return ProxResult([], res.value, True, True, radius, res)
    pts = [p for p, val in res.distinct_local_minima if val <= res.value + 100 * tol]
    return ProxResult(pts, res.value, False, False, radius, res)

"""Norms, Minkowski gauges and the modulus of convexity.

Exact moduli come from closed forms (Hilbert, Hanner); the empirical
estimator searches admissible pairs and so always returns an upper bound
on the true infimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    AssumptionAViolated,
    DimensionMismatch,
    EpsOutOfRange,
    ExponentOutOfRange,
    InvalidConstant,
    NoAdmissiblePairFound,
    NotInnerProduct,
    OriginNotInterior,
)
from .geometry import SpaceSpec, format_p, parse_p, pnorm

DEFAULT_EPS_GRID = np.geomspace(1e-3, 2.0, 64)
ASSUMPTION_TOL = 1e-12

SOURCES = ("exact-hilbert", "exact-hanner", "lower-bound-p", "exact-maxnorm", "empirical")


# ---------------------------------------------------------------- gauges


class GaugeBody:
    """Convex body with the origin in its interior."""

    kind = ""
    space: SpaceSpec

    @property
    def dim(self) -> int:
        return self.space.dim

    def gauge(self, X) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _arr(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise DimensionMismatch(f"gauge body lives in R^{self.dim}, got R^{X.shape[-1]}")
        return X


@dataclass(frozen=True, eq=False)
class PNormBall(GaugeBody):
    space: SpaceSpec
    radius: float = 1.0
    kind = "pnorm_ball"

    def __post_init__(self):
        if not self.radius > 0:
            raise OriginNotInterior(f"ball radius must be positive, got {self.radius}")

    def gauge(self, X):
        return pnorm(self._arr(X), self.space.p) / self.radius

    def to_dict(self):
        return {"kind": self.kind, "dim": self.space.dim, "p": _p_out(self.space.p),
                "radius": self.radius}


@dataclass(frozen=True, eq=False)
class BoxBody(GaugeBody):
    lo: np.ndarray
    hi: np.ndarray
    space: SpaceSpec = None
    kind = "box"

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(-1)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch("box body bounds have different lengths")
        if not (np.all(lo < 0) and np.all(hi > 0)):
            raise OriginNotInterior("box body must satisfy lo < 0 < hi in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.space is None:
            object.__setattr__(self, "space", SpaceSpec(lo.shape[0]))

    def gauge(self, X):
        X = self._arr(X)
        t = np.maximum(X / self.hi, X / self.lo)
        return np.maximum(np.max(t, axis=-1), 0.0)

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class Polytope(GaugeBody):
    """``{x : a_i . x <= b_i}`` with every ``b_i > 0``."""

    rows: np.ndarray
    offsets: np.ndarray
    space: SpaceSpec = None
    kind = "polytope"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        b = np.asarray(self.offsets, dtype=np.float64).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise DimensionMismatch("polytope needs one offset per row")
        if not np.all(b > 0):
            raise OriginNotInterior("polytope offsets must be positive so that 0 is interior")
        object.__setattr__(self, "rows", A)
        object.__setattr__(self, "offsets", b)
        if self.space is None:
            object.__setattr__(self, "space", SpaceSpec(A.shape[1]))
        # bounded iff no nonzero direction has all a_i . u <= 0
        from scipy.optimize import linprog

        for i in range(A.shape[1]):
            for sgn in (1.0, -1.0):
                c = np.zeros(A.shape[1])
                c[i] = -sgn
                res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * A.shape[1])
                if res.status == 3:
                    raise InvalidConstant("polytope is unbounded")

    def gauge(self, X):
        X = self._arr(X)
        return np.maximum(np.max(X @ (self.rows / self.offsets[:, None]).T, axis=-1), 0.0)

    def to_dict(self):
        return {"kind": self.kind, "rows": self.rows.tolist(), "offsets": self.offsets.tolist()}


@dataclass(frozen=True, eq=False)
class Ellipsoid(GaugeBody):
    """``{x : x^T Q x <= 1}`` for positive-definite ``Q``."""

    Q: np.ndarray
    space: SpaceSpec = None
    kind = "ellipsoid"

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=np.float64))
        if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T):
            raise InvalidConstant("ellipsoid matrix must be square and symmetric")
        if np.min(np.linalg.eigvalsh(Q)) <= 0:
            raise InvalidConstant("ellipsoid matrix must be positive definite")
        object.__setattr__(self, "Q", Q)
        if self.space is None:
            object.__setattr__(self, "space", SpaceSpec(Q.shape[0]))

    def gauge(self, X):
        X = self._arr(X)
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", X, self.Q, X), 0.0))

    def to_dict(self):
        return {"kind": self.kind, "Q": self.Q.tolist()}


def _p_out(p):
    return format_p(p) if p == math.inf else p


def body_from_dict(d: dict) -> GaugeBody:
    kind = d.get("kind")
    if kind == "pnorm_ball":
        return PNormBall(SpaceSpec(int(d["dim"]), parse_p(d.get("p", 2.0))), float(d.get("radius", 1.0)))
    if kind == "box":
        return BoxBody(d["lo"], d["hi"])
    if kind == "polytope":
        return Polytope(d["rows"], d["offsets"])
    if kind == "ellipsoid":
        return Ellipsoid(d["Q"])
    raise ValueError(f"unknown gauge body kind {kind!r}")


def gauge_eval(body: GaugeBody, x) -> float:
    """Minkowski gauge ``inf{t > 0 : x in t*body}`` at a single point."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return float(body.gauge(x))


# ---------------------------------------------------------------- exact moduli


@dataclass(frozen=True)
class ModulusValue:
    delta: float
    source: str

    @property
    def is_bound(self) -> bool:
        return self.source == "lower-bound-p"


def _check_eps(eps):
    if not (0.0 <= eps <= 2.0):
        raise EpsOutOfRange(f"eps must lie in [0, 2], got {eps}")


def hilbert_delta(eps: float) -> float:
    q = eps * eps / 4.0
    # 1 - sqrt(1 - q) without cancellation
    return q / (1.0 + math.sqrt(max(1.0 - q, 0.0)))


def hanner_delta(eps: float, p: float) -> float:
    t = (eps / 2.0) ** p
    if t >= 1.0:
        return 1.0
    return -math.expm1(math.log1p(-t) / p)


def modulus_exact(space: SpaceSpec, eps: float) -> ModulusValue:
    """Closed-form modulus of convexity of the p-norm.

    For ``1 < p < 2`` only the lower bound ``(p-1) eps^2 / 8`` is returned
    and flagged as such.
    """
    eps = float(eps)
    _check_eps(eps)
    p = space.p
    if p == 2.0:
        return ModulusValue(hilbert_delta(eps), "exact-hilbert")
    if p == math.inf:
        # flat faces: (1,1) and (1,1-eps) have midpoint of norm 1
        return ModulusValue(0.0, "exact-maxnorm")
    if p > 2.0:
        return ModulusValue(hanner_delta(eps, p), "exact-hanner")
    return ModulusValue((p - 1.0) * eps * eps / 8.0, "lower-bound-p")


@dataclass
class ModulusProfile:
    eps_grid: np.ndarray
    delta_values: np.ndarray
    source: str
    space: object = None

    def __post_init__(self):
        self.eps_grid = np.asarray(self.eps_grid, dtype=np.float64)
        self.delta_values = np.asarray(self.delta_values, dtype=np.float64)
        if self.eps_grid.shape != self.delta_values.shape or self.eps_grid.size == 0:
            raise ValueError("profile needs matching, nonempty eps and delta arrays")

    def rows(self):
        return list(zip(self.eps_grid.tolist(), self.delta_values.tolist()))


def exact_profile(space: SpaceSpec, eps_grid=None) -> ModulusProfile:
    grid = DEFAULT_EPS_GRID if eps_grid is None else np.asarray(eps_grid, dtype=np.float64)
    vals = [modulus_exact(space, e) for e in grid]
    return ModulusProfile(grid, np.array([v.delta for v in vals]), vals[0].source, space)


@dataclass(frozen=True)
class AssumptionVerdict:
    holds: bool
    sigma: float
    eps: float | None = None
    delta: float | None = None
    bound: float | None = None

    def to_dict(self):
        if self.holds:
            return {"verdict": "holds-on-grid", "sigma": self.sigma}
        return {"verdict": "violated", "sigma": self.sigma, "eps": self.eps,
                "delta": self.delta, "bound": self.bound}


def check_assumption_A(profile: ModulusProfile, sigma: float, tol: float = ASSUMPTION_TOL) -> AssumptionVerdict:
    """Test ``delta(eps) >= sigma eps^2 / 8`` on every grid point."""
    bound = sigma * profile.eps_grid ** 2 / 8.0
    bad = np.flatnonzero(profile.delta_values < bound - tol)
    if bad.size == 0:
        return AssumptionVerdict(True, float(sigma))
    k = int(bad[0])
    return AssumptionVerdict(False, float(sigma), float(profile.eps_grid[k]),
                             float(profile.delta_values[k]), float(bound[k]))


# ---------------------------------------------------------------- empirical modulus


class _Target:
    """Constraint functional G and distance norm for the pair search."""

    def __init__(self, target):
        if isinstance(target, SpaceSpec):
            self.G = target.norms
            self.space = target
        elif isinstance(target, GaugeBody):
            self.G = target.gauge
            self.space = target.space
        else:
            raise TypeError(f"expected SpaceSpec or GaugeBody, got {type(target).__name__}")
        self.dim = self.space.dim
        self.dist = self.space.norms


def _feasible(T, S, W, H):
    P = S[:, None] * W
    return (T.G(P + H) <= 1.0) & (T.G(P - H) <= 1.0)


def _best_midpoint(T, W, H, iters=60):
    """For each row, the largest gauge of ``s w`` with ``s w +- h`` admissible.

    Returns ``(g_mid, s)``; rows without any admissible ``s`` get ``nan``.
    """
    m = W.shape[0]
    s_grid = np.linspace(-1.0, 1.0, 33)
    feas = np.zeros((m, s_grid.size), dtype=bool)
    for j, s in enumerate(s_grid):
        feas[:, j] = _feasible(T, np.full(m, s), W, H)
    ok = feas.any(axis=1)
    gneg = T.G(-W)
    best_g = np.full(m, np.nan)
    best_s = np.full(m, np.nan)
    if not ok.any():
        return best_g, best_s
    idx = np.flatnonzero(ok)
    Wk, Hk, gn = W[idx], H[idx], gneg[idx]
    first = np.argmax(feas[idx], axis=1)
    last = s_grid.size - 1 - np.argmax(feas[idx][:, ::-1], axis=1)
    # upward: feasible lo, bound 1 (G(s w) <= 1 forces s <= 1)
    lo = s_grid[last].copy()
    hi = np.full(idx.size, 1.0)
    top_ok = _feasible(T, hi, Wk, Hk)
    lo[top_ok] = 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f = _feasible(T, mid, Wk, Hk)
        lo = np.where(f, mid, lo)
        hi = np.where(f, hi, mid)
    s_up = lo
    # downward: feasible hi, bound -1/G(-w)
    hi2 = s_grid[first].copy()
    lo2 = -1.0 / np.where(gn > 0, gn, 1.0)
    bot_ok = _feasible(T, lo2, Wk, Hk)
    hi2[bot_ok] = lo2[bot_ok]
    for _ in range(iters):
        mid = 0.5 * (lo2 + hi2)
        f = _feasible(T, mid, Wk, Hk)
        hi2 = np.where(f, mid, hi2)
        lo2 = np.where(f, lo2, mid)
    s_dn = hi2
    g_up = np.where(s_up > 0, s_up, 0.0)
    g_dn = np.where(s_dn < 0, -s_dn * gn, 0.0)
    use_up = g_up >= g_dn
    best_g[idx] = np.where(use_up, g_up, g_dn)
    best_s[idx] = np.where(use_up, s_up, s_dn)
    return best_g, best_s


def _normalize(T, W, H, eps):
    gw = T.G(W)
    dh = T.dist(H)
    good = (gw > 0) & (dh > 0)
    W = W[good] / gw[good][:, None]
    H = H[good] * (0.5 * eps / dh[good])[:, None]
    return W, H


def _candidates(T, rng, count):
    n = T.dim
    eye = np.eye(n)
    Ws, Us = [], []
    for i in range(n):
        for j in range(n):
            for sw in (1.0, -1.0):
                Ws.append(sw * eye[i])
                Us.append(eye[j])
    for i in range(n):
        for j in range(i + 1, n):
            d = (eye[i] + eye[j])
            e = (eye[i] - eye[j])
            Ws.extend([d, e, -d, -e])
            Us.extend([e, d, e, d])
    W0, U0 = np.array(Ws), np.array(Us)
    extra = max(count - W0.shape[0], 0)
    W1 = rng.standard_normal((extra, n))
    U1 = rng.standard_normal((extra, n))
    return np.vstack([W0, W1]), np.vstack([U0, U1])


@dataclass
class ModulusEstimate:
    eps: float
    delta: float
    x: np.ndarray
    y: np.ndarray
    pairs: int

    def to_dict(self):
        return {"eps": self.eps, "delta": self.delta, "x": self.x.tolist(),
                "y": self.y.tolist(), "pairs": self.pairs}


def _search(T, eps, budget, seed, chunk=4096):
    rng = np.random.default_rng(seed)
    W, U = _candidates(T, rng, int(budget))
    best = (math.inf, None, None, None)
    admissible = 0
    for start in range(0, W.shape[0], chunk):
        Wc, Hc = _normalize(T, W[start:start + chunk], U[start:start + chunk], eps)
        if Wc.shape[0] == 0:
            continue
        g, s = _best_midpoint(T, Wc, Hc)
        ok = ~np.isnan(g)
        admissible += int(ok.sum())
        if not ok.any():
            continue
        d = np.where(ok, 1.0 - g, math.inf)
        k = int(np.argmin(d))
        if d[k] < best[0]:
            best = (float(d[k]), Wc[k].copy(), Hc[k].copy(), float(s[k]))
    return best, admissible


def _refine(T, eps, best, steps=100):
    delta, w, h, s = best
    n = T.dim
    step = 0.25
    for _ in range(steps):
        # perturb every coordinate of w and of h in both directions at once
        Ws, Hs = [], []
        for which in (0, 1):
            for i in range(n):
                for sgn in (1.0, -1.0):
                    w2, h2 = w.copy(), h.copy()
                    if which == 0:
                        w2[i] += sgn * step
                    else:
                        h2[i] += sgn * step * eps
                    Ws.append(w2)
                    Hs.append(h2)
        Wc, Hc = _normalize(T, np.array(Ws), np.array(Hs), eps)
        if Wc.shape[0] == 0:
            step *= 0.5
            continue
        g, sv = _best_midpoint(T, Wc, Hc)
        d = np.where(np.isnan(g), math.inf, 1.0 - g)
        k = int(np.argmin(d))
        if d[k] < delta:
            delta, w, h, s = float(d[k]), Wc[k], Hc[k], float(sv[k])
        else:
            step *= 0.5
            if step < 1e-12:
                break
    return delta, w, h, s


def modulus_empirical(target, eps: float, budget: int = 10_000, seed: int = 0,
                      refine_steps: int = 100) -> ModulusEstimate:
    """Upper estimate of the modulus of convexity at ``eps``.

    Pairs are written ``x = s w + h``, ``y = s w - h`` with ``|2h| = eps``
    in the ambient norm, and ``s`` is pushed as far as the constraints
    ``G(x), G(y) <= 1`` allow. ``G`` is the norm for a SpaceSpec and the
    gauge for a body; the distance is always the ambient norm.
    """
    eps = float(eps)
    if not (0.0 < eps <= 2.0):
        raise EpsOutOfRange(f"eps must lie in (0, 2], got {eps}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    T = _Target(target)
    best, admissible = _search(T, eps, budget, seed)
    if best[1] is None:
        raise NoAdmissiblePairFound(f"no admissible pair at distance {eps} in {budget} candidates")
    delta, w, h, s = _refine(T, eps, best, refine_steps)
    mid = s * w
    return ModulusEstimate(eps, max(delta, 0.0), mid + h, mid - h, admissible)


def empirical_profile(target, eps_grid=None, budget: int = 2000, seed: int = 0,
                      skip_infeasible: bool = True) -> ModulusProfile:
    """Empirical profile; infeasible eps (larger than the body allows) are dropped."""
    grid = DEFAULT_EPS_GRID if eps_grid is None else np.asarray(eps_grid, dtype=np.float64)
    es, ds = [], []
    for k, e in enumerate(grid):
        try:
            est = modulus_empirical(target, float(e), budget=budget, seed=seed + k)
        except NoAdmissiblePairFound:
            if skip_infeasible:
                continue
            raise
        es.append(float(e))
        ds.append(est.delta)
    if not es:
        raise NoAdmissiblePairFound("no grid eps admits a pair")
    return ModulusProfile(np.array(es), np.array(ds), "empirical", target)


@dataclass
class DistanceSigma:
    eps: float
    sigma_hat: float
    x: np.ndarray
    y: np.ndarray
    lam: float
    samples: int


_DIST_LAMBDAS = np.array([0.5, 0.25, 0.75, 0.1, 0.9, 0.01, 0.99])


def sigma_at_distance(space: SpaceSpec, eps: float, budget: int = 20_000, seed: int = 0,
                      radius: float = 1.0) -> DistanceSigma:
    """Smallest sigma ratio of the norm over ball pairs with ``|x - y| = eps``.

    Pairs come from the modulus search (both ends on the sphere, midpoint
    pushed outward) plus random interior pairs; each pair is tried on a
    fixed lambda grid.
    """
    T = _Target(space)
    e = eps / radius
    rng = np.random.default_rng(seed)
    W, U = _candidates(T, rng, int(budget))
    W, H = _normalize(T, W, U, e)
    g, s = _best_midpoint(T, W, H)
    ok = ~np.isnan(g)
    W, H, s = W[ok], H[ok], s[ok]
    # shrink a share of the pairs inward so interior geometry is probed too
    shrink = np.ones(s.size)
    pick = rng.uniform(size=s.size) < 0.3
    shrink[pick] = rng.uniform(0.0, 1.0, size=int(pick.sum()))
    M = (s * shrink)[:, None] * W
    X = radius * (M + H)
    Y = radius * (M - H)
    nl = _DIST_LAMBDAS.size
    lam = np.tile(_DIST_LAMBDAS, X.shape[0])
    Xr = np.repeat(X, nl, axis=0)
    Yr = np.repeat(Y, nl, axis=0)
    Z = lam[:, None] * Xr + (1.0 - lam)[:, None] * Yr
    fx, fy, fz = space.norms(Xr), space.norms(Yr), space.norms(Z)
    d2 = space.norms(Xr - Yr) ** 2
    r, k, used = kernels.min_ratio(fx, fy, fz, lam, d2, 1e-12)
    if k < 0:
        raise NoAdmissiblePairFound("no usable pair at this distance")
    return DistanceSigma(float(eps), max(float(r), 0.0), Xr[k], Yr[k], float(lam[k]), used)


# ---------------------------------------------------------------- parameter formulas


def inner_product_norm_param(r: float, space: SpaceSpec | None = None) -> float:
    """Parameter ``1/r`` for an inner-product norm on ``B(0; r)``."""
    if space is not None and not space.is_inner_product:
        raise NotInnerProduct(f"p = {space.p} is not an inner-product norm")
    if not r > 0:
        raise InvalidConstant(f"radius must be positive, got {r}")
    return 1.0 / r


def norm_sqc_param(sigma_A: float, M: float, profile: ModulusProfile | None = None) -> float:
    """``sigma_A / (2M)`` for the norm on an M-bounded set.

    When a profile is supplied, Assumption (A) at ``sigma_A`` is checked
    first.
    """
    if not sigma_A > 0 or not M > 0:
        raise InvalidConstant("sigma_A and M must be positive")
    if profile is not None:
        v = check_assumption_A(profile, sigma_A)
        if not v.holds:
            raise AssumptionAViolated(
                f"delta({v.eps:.6g}) = {v.delta:.6g} < {v.bound:.6g} = sigma eps^2/8")
    return sigma_A / (2.0 * M)


def power_norm_param(sigma: float, a: float, R: float) -> float:
    """``a R^(a-1) sigma`` for ``|x|^a`` on ``B(0; R)``, ``0 < a < 1``."""
    if not (0.0 < a < 1.0):
        raise ExponentOutOfRange(f"power exponent must be in (0, 1), got {a}")
    if not R > 0:
        raise InvalidConstant(f"radius must be positive, got {R}")
    if sigma < 0:
        raise InvalidConstant("sigma must be nonnegative")
    return a * R ** (a - 1.0) * sigma


@dataclass
class GaugeVerdict:
    holds: bool
    sigma: float
    certificate_sigma: float | None
    profile: ModulusProfile
    failing_eps: float | None = None
    delta: float | None = None
    bound: float | None = None
    vacuous_eps: list = field(default_factory=list)

    def to_dict(self):
        out = {"verdict": "holds-on-grid" if self.holds else "violated", "sigma": self.sigma,
               "certificate_sigma": self.certificate_sigma, "kind": "estimated",
               "vacuous_eps": self.vacuous_eps}
        if not self.holds:
            out.update(eps=self.failing_eps, delta=self.delta, bound=self.bound)
        return out


def gauge_sqc_check(body: GaugeBody, sigma: float, eps_grid=None, budget: int = 2000,
                    seed: int = 0, tol: float = ASSUMPTION_TOL) -> GaugeVerdict:
    """Empirical test of ``delta_body(eps) >= sigma eps^2 / 4``.

    On success the gauge is certified (kind estimated) with ``sigma / 2`` on
    the closed body. Grid values of eps that admit no pair inside the body
    are vacuous and listed separately.
    """
    if not sigma > 0:
        raise InvalidConstant("sigma must be positive")
    grid = DEFAULT_EPS_GRID if eps_grid is None else np.asarray(eps_grid, dtype=np.float64)
    es, ds, vac = [], [], []
    for k, e in enumerate(grid):
        try:
            est = modulus_empirical(body, float(e), budget=budget, seed=seed + k)
        except NoAdmissiblePairFound:
            vac.append(float(e))
            continue
        es.append(float(e))
        ds.append(est.delta)
        bound = sigma * e * e / 4.0
        if est.delta < bound - tol:
            prof = ModulusProfile(np.array(es), np.array(ds), "empirical", body)
            return GaugeVerdict(False, sigma, None, prof, float(e), est.delta, float(bound), vac)
    prof = ModulusProfile(np.array(es), np.array(ds), "empirical", body) if es else \
        ModulusProfile(np.array([0.0]), np.array([0.0]), "empirical", body)
    return GaugeVerdict(True, sigma, sigma / 2.0, prof, vacuous_eps=vac)

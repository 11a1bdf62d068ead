"""Refutation and estimation of sigma-quasiconvexity.

A function is sigma-quasiconvex on a convex set when, for all x != y and
0 < lam < 1 with z = lam x + (1 - lam) y,

    f(z) <= max(f(x), f(y)) - sigma/2 * lam (1 - lam) |x - y|^2 .

``falsify`` searches for a triple breaking this, ``estimate_sigma`` takes
the infimum of the sampled ratios and ``oracle_sigma_1d`` scans every grid
triple of a 1-D function exhaustively.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import AllSamplesDegenerate, DimensionMismatch, GridTooCoarse, MidpointOutsideDomain
from .expr import Expr, Restrict
from .geometry import ConvexDomain, Interval, SpaceSpec

LAMBDA_GRID = (0.5, 0.25, 0.75, 0.1, 0.9, 0.01, 0.99)
DEFAULT_RTOL = 1e-9
DENOM_GUARD = 1e-12
CHUNK = 8192
NON_PROOF = ("no violation found within the sampling budget; this is not a proof of "
             "sigma-quasiconvexity")


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SQCKIT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class Triple:
    x: np.ndarray
    y: np.ndarray
    lam: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=np.float64)).reshape(-1)
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64)).reshape(-1)
        if x.shape != y.shape:
            raise DimensionMismatch("triple endpoints differ in dimension")
        if np.array_equal(x, y):
            raise ValueError("triple endpoints coincide")
        if not (0.0 < self.lam < 1.0):
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def z(self) -> np.ndarray:
        return _combine(self.x[None, :], self.y[None, :], np.array([self.lam]))[0]

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "lambda": self.lam,
                "x_hex": [float(v).hex() for v in self.x], "y_hex": [float(v).hex() for v in self.y],
                "lambda_hex": self.lam.hex()}

    @classmethod
    def from_dict(cls, d) -> "Triple":
        if "x_hex" in d:
            return cls([float.fromhex(v) for v in d["x_hex"]], [float.fromhex(v) for v in d["y_hex"]],
                       float.fromhex(d["lambda_hex"]))
        return cls(d["x"], d["y"], d["lambda"])


def _combine(X, Y, lam):
    return lam[:, None] * X + (1.0 - lam)[:, None] * Y


def _values(f: Expr, space, X, Y, lam):
    Z = _combine(X, Y, lam)
    # endpoints repeat once per lambda; evaluate each distinct point once
    U, inv = np.unique(np.vstack([X, Y]), axis=0, return_inverse=True)
    fu = f.evaluate(U)[inv.reshape(-1)]
    fx, fy = fu[:X.shape[0]], fu[X.shape[0]:]
    fz = f.evaluate(Z)
    d2 = space.norms(X - Y) ** 2
    return fx, fy, fz, d2


@dataclass(frozen=True, eq=False)
class ViolationWitness:
    triple: Triple
    sigma: float
    fx: float
    fy: float
    lhs: float
    rhs: float
    margin: float
    tolerance: float

    @classmethod
    def at(cls, f: Expr, space, t: Triple, sigma: float, rtol: float = DEFAULT_RTOL):
        fx, fy, fz, d2 = _values(f, space, t.x[None, :], t.y[None, :], np.array([t.lam]))
        mx = max(fx[0], fy[0])
        q = t.lam * (1.0 - t.lam) * d2[0]
        rhs = mx - (0.5 * sigma) * q
        tau = rtol * (1.0 + abs(mx))
        return cls(t, float(sigma), float(fx[0]), float(fy[0]), float(fz[0]), float(rhs),
                   float(fz[0] - rhs), float(tau))

    @property
    def holds(self) -> bool:
        return self.margin > self.tolerance and self.rhs != math.inf

    def reverify(self, f: Expr, space) -> bool:
        again = ViolationWitness.at(f, space, self.triple, self.sigma, self.tolerance_rtol)
        return (again.lhs == self.lhs and again.rhs == self.rhs and again.margin == self.margin
                and again.holds)

    @property
    def tolerance_rtol(self) -> float:
        mx = max(self.fx, self.fy)
        return self.tolerance / (1.0 + abs(mx))

    @property
    def defect(self) -> float:
        return max(self.fx, self.fy) - self.lhs

    def to_dict(self) -> dict:
        return {"triple": self.triple.to_dict(), "sigma": self.sigma, "f_x": self.fx, "f_y": self.fy,
                "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "tolerance": self.tolerance,
                "defect": self.defect, "z": self.triple.z.tolist(),
                "z_hex": [float(v).hex() for v in self.triple.z]}


def defect(f: Expr, t: Triple, space=None, domain: ConvexDomain | None = None) -> float:
    """``max(f(x), f(y)) - f(z)``; ``+inf`` when the larger endpoint value is infinite."""
    if domain is not None:
        pts = np.vstack([t.x, t.y, t.z])
        inside = domain.contains(pts)
        if inside[0] and inside[1] and not inside[2]:
            raise MidpointOutsideDomain("combination left the domain although both endpoints are inside")
    fx, fy, fz = f.evaluate(np.vstack([t.x, t.y, t.z]))
    mx = max(fx, fy)
    if mx == math.inf:
        return math.inf
    return float(mx - fz)


# ---------------------------------------------------------------- triple generation


@dataclass
class TripleBatch:
    X: np.ndarray
    Y: np.ndarray
    lam: np.ndarray
    n_structured: int
    spec: dict = field(default_factory=dict)

    def __len__(self):
        return self.lam.shape[0]

    def triple(self, k: int) -> Triple:
        return Triple(self.X[k], self.Y[k], float(self.lam[k]))


def _inside(domain, P):
    P = np.asarray(P, dtype=np.float64).reshape(-1, domain.dim)
    return P[domain.contains(P, tol=0.0)] if len(P) else P


def generate_triples(f: Expr, domain: ConvexDomain, budget: int, seed: int,
                     hints=(), lambdas=LAMBDA_GRID) -> TripleBatch:
    """Deterministic triple list: hints, structured pairs, then random pairs.

    Structured pairs join special points of ``f`` and anchor points of the
    domain. Random pairs are 50% uniform, 25% near the boundary and 25%
    near-antipodal (a boundary point and its reflection). Every pair is
    tried on the lambda grid (1/2 first) plus one uniform draw.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if f.dim != domain.dim:
        raise DimensionMismatch(f"function lives in R^{f.dim}, domain in R^{domain.dim}")
    n = domain.dim
    rng = np.random.default_rng(seed)
    lam_grid = np.asarray(lambdas, dtype=np.float64)
    per = lam_grid.size + 1
    Xs, Ys, Ls = [], [], []
    for h in hints:
        Xs.append(h.x[None, :])
        Ys.append(h.y[None, :])
        Ls.append(np.array([h.lam]))
    special = _inside(domain, f.special_points())
    anchors = domain.anchors()
    pairs = []
    groups = [(special, special, True), (special, anchors, False), (anchors, anchors, True)]
    for A, B, same in groups:
        for i in range(len(A)):
            for j in range(i + 1 if same else 0, len(B)):
                if not np.array_equal(A[i], B[j]):
                    pairs.append((A[i], B[j]))
    if pairs:
        P = np.array([p[0] for p in pairs])
        Q = np.array([p[1] for p in pairs])
        Xs.append(np.repeat(P, lam_grid.size, axis=0))
        Ys.append(np.repeat(Q, lam_grid.size, axis=0))
        Ls.append(np.tile(lam_grid, len(pairs)))
    n_struct = int(sum(len(l) for l in Ls))
    remaining = max(budget - n_struct, 0)
    n_pairs = -(-remaining // per)
    if n_pairs:
        n_uni = n_pairs // 2
        n_bnd = n_pairs // 4
        n_anti = n_pairs - n_uni - n_bnd
        X = np.empty((n_pairs, n))
        Y = np.empty((n_pairs, n))
        X[:n_uni] = domain.sample_uniform(rng, n_uni)
        Y[:n_uni] = domain.sample_uniform(rng, n_uni)
        X[n_uni:n_uni + n_bnd] = domain.sample_boundary(rng, n_bnd)
        Y[n_uni:n_uni + n_bnd] = domain.sample_boundary(rng, n_bnd)
        B = domain.sample_boundary(rng, n_anti)
        scale = 1e-3 * max(domain.diameter(), 1e-300)
        jitter = rng.standard_normal((n_anti, n)) * scale * 10.0 ** -rng.uniform(0, 6, size=(n_anti, 1))
        X[n_uni + n_bnd:] = B
        Y[n_uni + n_bnd:] = domain.project(domain.reflect(B) + jitter)
        # interleave the three families so a truncated budget still sees all of them
        order = np.argsort(np.concatenate([np.arange(n_uni) * 4.0, np.arange(n_bnd) * 4.0 + 1.0,
                                           np.arange(n_anti) * 4.0 + 2.0]), kind="stable")
        X, Y = X[order], Y[order]
        lam_u = rng.uniform(0.0, 1.0, size=n_pairs)
        lam_u = np.clip(lam_u, 1e-6, 1.0 - 1e-6)
        L = np.concatenate([np.broadcast_to(lam_grid, (n_pairs, lam_grid.size)), lam_u[:, None]], axis=1)
        Xs.append(np.repeat(X, per, axis=0))
        Ys.append(np.repeat(Y, per, axis=0))
        Ls.append(L.reshape(-1))
    X = np.vstack(Xs) if Xs else np.empty((0, n))
    Y = np.vstack(Ys) if Ys else np.empty((0, n))
    lam = np.concatenate(Ls) if Ls else np.empty(0)
    X, Y, lam = X[:max(budget, n_struct)], Y[:max(budget, n_struct)], lam[:max(budget, n_struct)]
    keep = ~np.all(X == Y, axis=1)
    spec = {"budget": int(budget), "seed": int(seed), "hints": len(hints), "structured": n_struct,
            "lambda_grid": list(map(float, lam_grid)), "lambda_extra": "uniform(0,1) per pair",
            "pair_mix": {"uniform": 0.5, "boundary": 0.25, "near_antipodal": 0.25}}
    return TripleBatch(X[keep], Y[keep], lam[keep], n_struct, spec)


# ---------------------------------------------------------------- falsify


@dataclass
class FalsifyResult:
    witness: ViolationWitness | None
    sigma: float
    checked: int
    spec: dict

    @property
    def found(self) -> bool:
        return self.witness is not None

    def to_dict(self) -> dict:
        out = {"sigma": self.sigma, "checked": self.checked, "sampling": self.spec,
               "violation": self.witness is not None}
        if self.witness is None:
            out["disclaimer"] = NON_PROOF
        else:
            out["witness"] = self.witness.to_dict()
        return out


def _chunks(n, size):
    return [(s, min(n, s + size)) for s in range(0, n, size)]


def _map_chunks(fn, spans, threads):
    """Apply ``fn`` to spans; results come back in span order."""
    if threads <= 1 or len(spans) <= 1:
        for sp in spans:
            yield fn(sp)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(fn, spans)


def falsify(f: Expr, domain: ConvexDomain, sigma: float, budget: int = 100_000, seed: int = 0,
            hints=(), threads: int | None = None, rtol: float = DEFAULT_RTOL,
            lambdas=LAMBDA_GRID) -> FalsifyResult:
    """Search for a violation of sigma-quasiconvexity.

    The returned witness is the violator with the smallest index in the
    pre-generated triple list, so results do not depend on ``threads``.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    threads = default_threads() if threads is None else max(1, int(threads))
    batch = generate_triples(f, domain, budget, seed, hints, lambdas)
    space = domain.space

    def scan(span):
        s, e = span
        fx, fy, fz, d2 = _values(f, space, batch.X[s:e], batch.Y[s:e], batch.lam[s:e])
        k = kernels.first_violation(fx, fy, fz, batch.lam[s:e], d2, float(sigma), rtol)
        return s + k if k >= 0 else -1

    found = -1
    for k in _map_chunks(scan, _chunks(len(batch), CHUNK), threads):
        if k >= 0:
            found = k
            break
    if found < 0:
        return FalsifyResult(None, float(sigma), len(batch), batch.spec)
    w = ViolationWitness.at(f, space, batch.triple(found), sigma, rtol)
    return FalsifyResult(w, float(sigma), found + 1, batch.spec)


# ---------------------------------------------------------------- estimate


@dataclass
class SigmaEstimate:
    sigma_hat: float
    argmin_triple: Triple | None
    samples_used: int
    grid_spec: dict
    raw_ratio: float = math.nan
    quasiconvex: bool = True
    witness: ViolationWitness | None = None

    def to_dict(self) -> dict:
        out = {"sigma_hat": self.sigma_hat, "raw_ratio": self.raw_ratio,
               "samples_used": self.samples_used, "sampling": self.grid_spec,
               "quasiconvex": self.quasiconvex,
               "argmin_triple": None if self.argmin_triple is None else self.argmin_triple.to_dict()}
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
        return out


def sigma_ratio(f: Expr, space, t: Triple) -> float:
    fx, fy, fz, d2 = _values(f, space, t.x[None, :], t.y[None, :], np.array([t.lam]))
    mx = np.maximum(fx, fy)
    den = t.lam * (1.0 - t.lam) * d2
    return float((2.0 * (mx - fz) / den)[0])


def estimate_sigma(f: Expr, domain: ConvexDomain, budget: int = 100_000, seed: int = 0,
                   hints=(), threads: int | None = None, guard: float = DENOM_GUARD,
                   rtol: float = DEFAULT_RTOL) -> SigmaEstimate:
    """Infimum of sampled sigma ratios, clamped below at 0.

    A clearly negative ratio means the function is not even quasiconvex and
    the triple is returned as a witness at sigma = 0.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    batch = generate_triples(f, domain, budget, seed, hints)
    space = domain.space

    def scan(span):
        s, e = span
        fx, fy, fz, d2 = _values(f, space, batch.X[s:e], batch.Y[s:e], batch.lam[s:e])
        r, k, used = kernels.min_ratio(fx, fy, fz, batch.lam[s:e], d2, guard)
        return r, (s + k if k >= 0 else -1), used

    best, bk, used = math.inf, -1, 0
    for r, k, u in _map_chunks(scan, _chunks(len(batch), CHUNK), threads):
        used += u
        if k >= 0 and (bk < 0 or r < best):
            best, bk = r, k
    if used == 0 or bk < 0:
        raise AllSamplesDegenerate("every sampled triple was degenerate or had an infinite endpoint")
    t = batch.triple(bk)
    est = SigmaEstimate(max(best, 0.0), t, used, batch.spec, raw_ratio=best)
    if best < 0:
        w = ViolationWitness.at(f, space, t, 0.0, rtol)
        if w.holds:
            est.quasiconvex = False
            est.witness = w
    return est


# ---------------------------------------------------------------- 1-D oracle


def oracle_lambdas() -> np.ndarray:
    lam = [0.5]
    for k in range(2, 14):
        lam.extend([2.0 ** -k, 1.0 - 2.0 ** -k])
    lam.extend([0.1, 0.9, 0.01, 0.99, 0.001, 0.999])
    return np.array(lam)


@dataclass
class OracleResult:
    sigma_hat: float
    triple: Triple | None
    triples: int
    grid_n: int
    interval: tuple
    raw_ratio: float = math.nan

    def to_dict(self):
        return {"sigma_hat": self.sigma_hat, "raw_ratio": self.raw_ratio, "triples": self.triples,
                "grid_n": self.grid_n, "interval": list(self.interval),
                "triple": None if self.triple is None else self.triple.to_dict()}


def oracle_sigma_1d(f: Expr, interval, grid_n: int = 8193, lambdas=None) -> OracleResult:
    """Exhaustive grid oracle for a 1-D function.

    Every grid pair ``(x_i, x_{i+d})`` is combined with each lambda rounded
    so that the combination lands on a grid point; ``lambda = 1/2`` is exact
    for even ``d``. Deterministic, no seed.
    """
    if f.dim != 1:
        raise DimensionMismatch("the 1-D oracle needs a 1-D function")
    if grid_n < 3:
        raise GridTooCoarse("grid_n must be at least 3")
    if isinstance(interval, Interval):
        lo, hi = interval.lo, interval.hi
    else:
        lo, hi = (float(v) for v in interval)
    if not hi > lo:
        raise GridTooCoarse("oracle interval has zero length")
    lam = oracle_lambdas() if lambdas is None else np.asarray(lambdas, dtype=np.float64)
    xs = np.linspace(lo, hi, grid_n)
    h = (hi - lo) / (grid_n - 1)
    fv = f.evaluate(xs.reshape(-1, 1))
    best, d, m, i, count = kernels.oracle_scan(fv, h, lam)
    if d < 0 or count < 3:
        raise GridTooCoarse("fewer than 3 usable grid triples")
    t = Triple([xs[i]], [xs[i + d]], (d - m) / d)
    return OracleResult(max(best, 0.0), t, int(count), int(grid_n), (lo, hi), raw_ratio=best)


# ---------------------------------------------------------------- segments


def segment_endpoints(domain: ConvexDomain, count: int, seed: int):
    """Anchor diameters first, then 1/3 uniform, 1/3 boundary, 1/3 antipodal pairs."""
    rng = np.random.default_rng(seed)
    A = domain.anchors()
    U, V = [], []
    for i in range(len(A)):
        for j in range(i + 1, len(A)):
            if not np.array_equal(A[i], A[j]):
                U.append(A[i])
                V.append(A[j])
    U, V = U[:count], V[:count]
    rest = count - len(U)
    if rest > 0:
        k1 = rest // 3
        k2 = rest // 3
        k3 = rest - k1 - k2
        P = np.vstack([domain.sample_uniform(rng, k1), domain.sample_boundary(rng, k2),
                       domain.sample_boundary(rng, k3)])
        Q = np.vstack([domain.sample_uniform(rng, k1), domain.sample_boundary(rng, k2),
                       domain.reflect(P[k1 + k2:])])
        U.extend(P)
        V.extend(Q)
    return np.array(U), np.array(V)


def certify_on_segments(f: Expr, domain: ConvexDomain, segment_count: int = 200, grid_n: int = 1025,
                        seed: int = 0, lambdas=None) -> SigmaEstimate:
    """Minimum 1-D oracle value over unit-speed restrictions to random chords."""
    U, V = segment_endpoints(domain, segment_count, seed)
    p = domain.space.p
    best, bt, total = math.inf, None, 0
    for u, x in zip(U, V):
        if np.array_equal(u, x):
            continue
        r = Restrict(f, u, x, unit_speed=True, p=p)
        L = r.length
        try:
            res = oracle_sigma_1d(r, (0.0, L), grid_n, lambdas)
        except GridTooCoarse:
            continue
        total += res.triples
        if res.raw_ratio < best:
            best = res.raw_ratio
            s0, s1 = float(res.triple.x[0]), float(res.triple.y[0])
            d = r.direction
            bt = Triple(u + s0 * d, u + s1 * d, res.triple.lam)
    if bt is None:
        raise GridTooCoarse("no usable segment")
    spec = {"segments": int(segment_count), "grid_n": int(grid_n), "seed": int(seed)}
    est = SigmaEstimate(max(best, 0.0), bt, total, spec, raw_ratio=best)
    est.quasiconvex = best >= 0 or best > -1e-9
    return est

"""Ambient norms and compact convex search regions in R^n."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, LoAboveHi, NonpositiveRadius, SpecSyntax

Array = np.ndarray


def pnorm(X, p: float) -> Array:
    """p-norm along the last axis; ``p = inf`` is the max-norm."""
    X = np.asarray(X, dtype=np.float64)
    if p == math.inf:
        return np.max(np.abs(X), axis=-1)
    if p == 2:
        return np.sqrt(np.sum(X * X, axis=-1))
    if p == 1:
        return np.sum(np.abs(X), axis=-1)
    return np.sum(np.abs(X) ** p, axis=-1) ** (1.0 / p)


def dual_exponent(p: float) -> float:
    if p == math.inf:
        return 1.0
    if p == 1:
        return math.inf
    return p / (p - 1.0)


def format_p(p: float) -> str:
    return "inf" if p == math.inf else repr(float(p))


def parse_p(text) -> float:
    if isinstance(text, str) and text.strip().lower() in ("inf", "infinity", "∞"):
        return math.inf
    return float(text)


@dataclass(frozen=True)
class SpaceSpec:
    """R^dim with the p-norm, ``1 < p <= inf``."""

    dim: int
    p: float = 2.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dim}")
        if not (self.p > 1):
            raise ValueError(f"norm exponent must satisfy p > 1, got {self.p}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "p", float(self.p))

    def norms(self, X) -> Array:
        return pnorm(X, self.p)

    def norm(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.dim:
            raise DimensionMismatch(f"expected a point in R^{self.dim}, got R^{x.shape[0]}")
        return float(pnorm(x, self.p))

    @property
    def is_inner_product(self) -> bool:
        return self.p == 2.0 or self.dim == 1

    def to_dict(self) -> dict:
        return {"dim": self.dim, "p": format_p(self.p) if self.p == math.inf else self.p}


@dataclass(frozen=True)
class ProductSpace:
    """Product of equal-exponent blocks combined by an outer p-norm.

    ``outer_p = 1`` gives the sum norm used for infimal convolutions.
    """

    blocks: tuple
    inner_p: float = 2.0
    outer_p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        if self.outer_p < 1:
            raise ValueError("outer exponent must be >= 1")

    @property
    def dim(self) -> int:
        return sum(self.blocks)

    @property
    def p(self) -> float:
        return self.outer_p if len(set(self.blocks)) == 1 and self.inner_p == self.outer_p else math.nan

    def norms(self, X) -> Array:
        X = np.asarray(X, dtype=np.float64)
        parts = []
        start = 0
        for b in self.blocks:
            parts.append(pnorm(X[..., start:start + b], self.inner_p))
            start += b
        return pnorm(np.stack(parts, axis=-1), self.outer_p)

    def norm(self, x) -> float:
        return float(self.norms(np.asarray(x, dtype=np.float64).reshape(-1)))


def _vec(x, name="point") -> Array:
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _fmt_vec(v: Array) -> str:
    return ",".join(repr(float(t)) for t in v)


def _gen_gaussian(rng: np.random.Generator, size, p: float) -> Array:
    # density proportional to exp(-|t|^p)
    g = rng.gamma(1.0 / p, 1.0, size=size)
    s = rng.choice(np.array([-1.0, 1.0]), size=size)
    return s * g ** (1.0 / p)


class ConvexDomain:
    """Compact convex region with a norm.

    Subclasses provide membership, sampling (uniform, near-boundary,
    reflection through the centre), projection and a few bounds used by the
    calculus (largest norm, bounding box).
    """

    space: SpaceSpec

    @property
    def dim(self) -> int:
        return self.space.dim

    def contains(self, X, tol: float = 1e-9) -> Array:
        raise NotImplementedError

    def sample_uniform(self, rng, m: int) -> Array:
        raise NotImplementedError

    def sample_boundary(self, rng, m: int) -> Array:
        raise NotImplementedError

    def reflect(self, X) -> Array:
        raise NotImplementedError

    def project(self, X) -> Array:
        raise NotImplementedError

    def nearest_boundary(self, x) -> Array:
        raise NotImplementedError

    def anchors(self) -> Array:
        raise NotImplementedError

    def max_norm(self) -> float:
        raise NotImplementedError

    def bounding_box(self) -> tuple[Array, Array]:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    def translate(self, t) -> "ConvexDomain":
        raise NotImplementedError

    def affine_image(self, A, b) -> "ConvexDomain":
        """A convex region containing ``{A x + b : x in self}``."""
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        b = _vec(b, "offset")
        lo, hi = self.bounding_box()
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        c = A @ mid + b
        rad = np.abs(A) @ half
        return _box_or_interval(c - rad, c + rad, self.space.p)

    @property
    def center(self) -> Array:
        lo, hi = self.bounding_box()
        return 0.5 * (lo + hi)

    def to_spec(self) -> str:
        raise NotImplementedError

    def _suffix(self) -> str:
        return f"@p={format_p(self.space.p)}"

    def __repr__(self):
        return f"{type(self).__name__}({self.to_spec()})"

    def _check(self, X) -> Array:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1) if self.dim > 1 or X.shape[0] == 1 else X.reshape(-1, 1)
        if X.shape[-1] != self.dim:
            raise DimensionMismatch(f"domain lives in R^{self.dim}, got points in R^{X.shape[-1]}")
        return X


def _box_or_interval(lo, hi, p) -> ConvexDomain:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.shape[0] == 1:
        return Interval(float(lo[0]), float(hi[0]), p=p)
    return Box(lo, hi, space=SpaceSpec(lo.shape[0], p))


@dataclass(frozen=True, eq=False, repr=False)
class Ball(ConvexDomain):
    center_pt: Array
    radius: float
    space: SpaceSpec = None

    def __post_init__(self):
        c = _vec(self.center_pt, "center")
        object.__setattr__(self, "center_pt", c)
        if self.space is None:
            object.__setattr__(self, "space", SpaceSpec(c.shape[0]))
        if self.space.dim != c.shape[0]:
            raise DimensionMismatch("ball center does not match the space dimension")
        if not (self.radius > 0) or not math.isfinite(self.radius):
            raise NonpositiveRadius(f"ball radius must be positive and finite, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def center(self) -> Array:
        return self.center_pt

    def contains(self, X, tol=1e-9):
        X = self._check(X)
        return self.space.norms(X - self.center_pt) <= self.radius * (1.0 + tol) + tol

    def _unit_ball(self, rng, m):
        n, p = self.dim, self.space.p
        if p == math.inf:
            return rng.uniform(-1.0, 1.0, size=(m, n))
        t = _gen_gaussian(rng, (m, n), p)
        z = rng.exponential(1.0, size=m)
        return t / (np.sum(np.abs(t) ** p, axis=1) + z)[:, None] ** (1.0 / p)

    def _unit_sphere(self, rng, m):
        n, p = self.dim, self.space.p
        if p == math.inf:
            u = rng.uniform(-1.0, 1.0, size=(m, n))
        else:
            u = _gen_gaussian(rng, (m, n), p)
        nrm = pnorm(u, p)
        nrm[nrm == 0] = 1.0
        return u / nrm[:, None]

    def sample_uniform(self, rng, m):
        return self.center_pt + self.radius * self._unit_ball(rng, m)

    def sample_boundary(self, rng, m):
        u = self._unit_sphere(rng, m)
        depth = 10.0 ** -rng.uniform(1.0, 12.0, size=m)
        depth[rng.uniform(size=m) < 0.25] = 0.0
        return self.center_pt + (self.radius * (1.0 - depth))[:, None] * u

    def reflect(self, X):
        return 2.0 * self.center_pt - np.asarray(X, dtype=np.float64)

    def project(self, X):
        X = self._check(X)
        d = X - self.center_pt
        nrm = self.space.norms(d)
        scale = np.where(nrm > self.radius, self.radius / np.where(nrm > 0, nrm, 1.0), 1.0)
        return self.center_pt + d * scale[:, None]

    def nearest_boundary(self, x):
        d = _vec(x) - self.center_pt
        nrm = self.space.norm(d)
        if nrm == 0:
            d = np.zeros(self.dim)
            d[0] = 1.0
            nrm = 1.0
        return self.center_pt + d * (self.radius / nrm)

    def anchors(self):
        pts = [self.center_pt]
        for i in range(min(self.dim, 8)):
            e = np.zeros(self.dim)
            e[i] = self.radius
            pts.append(self.center_pt - e)
            pts.append(self.center_pt + e)
        return np.array(pts)

    def max_norm(self):
        return self.space.norm(self.center_pt) + self.radius

    def bounding_box(self):
        return self.center_pt - self.radius, self.center_pt + self.radius

    def diameter(self):
        return 2.0 * self.radius

    def translate(self, t):
        return Ball(self.center_pt + _vec(t), self.radius, self.space)

    def affine_image(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        b = _vec(b, "offset")
        c = A @ self.center_pt + b
        q = dual_exponent(self.space.p)
        rad = self.radius * pnorm(A, q)
        return _box_or_interval(c - rad, c + rad, self.space.p)

    def to_spec(self):
        return f"ball:{_fmt_vec(self.center_pt)}:{self.radius!r}{self._suffix()}"


@dataclass(frozen=True, eq=False, repr=False)
class Box(ConvexDomain):
    lo: Array
    hi: Array
    space: SpaceSpec = None

    def __post_init__(self):
        lo, hi = _vec(self.lo, "lo"), _vec(self.hi, "hi")
        if lo.shape != hi.shape:
            raise DimensionMismatch("box bounds have different lengths")
        if np.any(lo > hi):
            raise LoAboveHi(f"box lower corner exceeds upper corner: {lo} > {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.space is None:
            object.__setattr__(self, "space", SpaceSpec(lo.shape[0]))
        if self.space.dim != lo.shape[0]:
            raise DimensionMismatch("box bounds do not match the space dimension")

    def contains(self, X, tol=1e-9):
        X = self._check(X)
        slack = tol * (1.0 + np.abs(self.hi - self.lo))
        return np.all((X >= self.lo - slack) & (X <= self.hi + slack), axis=1)

    def sample_uniform(self, rng, m):
        return rng.uniform(self.lo, self.hi, size=(m, self.dim))

    def sample_boundary(self, rng, m):
        X = self.sample_uniform(rng, m)
        k = rng.integers(0, self.dim, size=m)
        side = rng.uniform(size=m) < 0.5
        X[np.arange(m), k] = np.where(side, self.lo[k], self.hi[k])
        corner = rng.uniform(size=m) < 0.2
        if np.any(corner):
            pick = rng.uniform(size=(int(corner.sum()), self.dim)) < 0.5
            X[corner] = np.where(pick, self.lo, self.hi)
        return X

    def reflect(self, X):
        return self.lo + self.hi - np.asarray(X, dtype=np.float64)

    def project(self, X):
        return np.clip(self._check(X), self.lo, self.hi)

    def nearest_boundary(self, x):
        x = np.clip(_vec(x), self.lo, self.hi)
        gaps = np.concatenate([x - self.lo, self.hi - x])
        k = int(np.argmin(gaps))
        out = x.copy()
        if k < self.dim:
            out[k] = self.lo[k]
        else:
            out[k - self.dim] = self.hi[k - self.dim]
        return out

    def anchors(self):
        pts = []
        if self.dim <= 4:
            for bits in itertools.product((0, 1), repeat=self.dim):
                pts.append(np.where(np.array(bits) == 1, self.hi, self.lo))
        else:
            pts.extend([self.lo, self.hi])
        pts.append(0.5 * (self.lo + self.hi))
        return np.array(pts)

    def max_norm(self):
        return float(self.space.norms(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()

    def diameter(self):
        return float(self.space.norms(self.hi - self.lo))

    def translate(self, t):
        t = _vec(t)
        return Box(self.lo + t, self.hi + t, self.space)

    def to_spec(self):
        return f"box:{_fmt_vec(self.lo)}:{_fmt_vec(self.hi)}{self._suffix()}"


@dataclass(frozen=True, eq=False, repr=False)
class Segment(ConvexDomain):
    a: Array
    b: Array
    space: SpaceSpec = None

    def __post_init__(self):
        a, b = _vec(self.a, "a"), _vec(self.b, "b")
        if a.shape != b.shape:
            raise DimensionMismatch("segment endpoints have different lengths")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if self.space is None:
            object.__setattr__(self, "space", SpaceSpec(a.shape[0]))

    def _param(self, X):
        d = self.b - self.a
        dd = float(d @ d)
        if dd == 0:
            return np.zeros(X.shape[0])
        return (X - self.a) @ d / dd

    def contains(self, X, tol=1e-9):
        X = self._check(X)
        t = self._param(X)
        foot = self.a + np.clip(t, 0.0, 1.0)[:, None] * (self.b - self.a)
        scale = 1.0 + self.space.norm(self.b - self.a) + self.max_norm()
        return self.space.norms(X - foot) <= tol * scale

    def _at(self, t):
        return self.a + np.asarray(t)[:, None] * (self.b - self.a)

    def sample_uniform(self, rng, m):
        return self._at(rng.uniform(size=m))

    def sample_boundary(self, rng, m):
        t = 10.0 ** -rng.uniform(1.0, 12.0, size=m)
        t[rng.uniform(size=m) < 0.25] = 0.0
        t = np.where(rng.uniform(size=m) < 0.5, t, 1.0 - t)
        return self._at(t)

    def reflect(self, X):
        return self.a + self.b - np.asarray(X, dtype=np.float64)

    def project(self, X):
        X = self._check(X)
        return self._at(np.clip(self._param(X), 0.0, 1.0))

    def nearest_boundary(self, x):
        t = float(self._param(_vec(x).reshape(1, -1))[0])
        return self.a.copy() if t < 0.5 else self.b.copy()

    def anchors(self):
        return np.array([self.a, self.b, 0.5 * (self.a + self.b)])

    def max_norm(self):
        return max(self.space.norm(self.a), self.space.norm(self.b))

    def bounding_box(self):
        return np.minimum(self.a, self.b), np.maximum(self.a, self.b)

    def diameter(self):
        return self.space.norm(self.b - self.a)

    def translate(self, t):
        t = _vec(t)
        return Segment(self.a + t, self.b + t, self.space)

    def affine_image(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        b = _vec(b, "offset")
        a2, b2 = A @ self.a + b, A @ self.b + b
        if a2.shape[0] == 1:
            return Interval(float(min(a2[0], b2[0])), float(max(a2[0], b2[0])), p=self.space.p)
        return Segment(a2, b2, SpaceSpec(a2.shape[0], self.space.p))

    def to_spec(self):
        return f"segment:{_fmt_vec(self.a)}:{_fmt_vec(self.b)}{self._suffix()}"


@dataclass(frozen=True, eq=False, repr=False)
class Interval(ConvexDomain):
    lo: float
    hi: float
    p: float = 2.0
    space: SpaceSpec = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval bounds must be finite")
        if self.lo > self.hi:
            raise LoAboveHi(f"interval lower bound {self.lo} exceeds upper bound {self.hi}")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "space", SpaceSpec(1, self.p))

    def contains(self, X, tol=1e-9):
        X = self._check(X)[:, 0]
        slack = tol * (1.0 + (self.hi - self.lo))
        return (X >= self.lo - slack) & (X <= self.hi + slack)

    def sample_uniform(self, rng, m):
        return rng.uniform(self.lo, self.hi, size=(m, 1))

    def sample_boundary(self, rng, m):
        w = self.hi - self.lo
        off = w * 10.0 ** -rng.uniform(1.0, 12.0, size=m)
        off[rng.uniform(size=m) < 0.25] = 0.0
        x = np.where(rng.uniform(size=m) < 0.5, self.lo + off, self.hi - off)
        return x[:, None]

    def reflect(self, X):
        return self.lo + self.hi - np.asarray(X, dtype=np.float64)

    def project(self, X):
        return np.clip(self._check(X), self.lo, self.hi)

    def nearest_boundary(self, x):
        x = float(_vec(x)[0])
        return np.array([self.lo if x - self.lo <= self.hi - x else self.hi])

    def anchors(self):
        return np.array([[self.lo], [self.hi], [0.5 * (self.lo + self.hi)]])

    def max_norm(self):
        return max(abs(self.lo), abs(self.hi))

    def bounding_box(self):
        return np.array([self.lo]), np.array([self.hi])

    def diameter(self):
        return self.hi - self.lo

    def translate(self, t):
        t = float(_vec(t)[0])
        return Interval(self.lo + t, self.hi + t, self.p)

    def affine_image(self, A, b):
        return Segment([self.lo], [self.hi], self.space).affine_image(A, b)

    def to_spec(self):
        return f"interval:{self.lo!r}:{self.hi!r}{self._suffix()}"


def _csv(text: str, what: str) -> Array:
    try:
        return np.array([float(t) for t in text.split(",")], dtype=np.float64)
    except ValueError:
        raise SpecSyntax(f"cannot parse {what} {text!r} as comma-separated numbers") from None


def parse_domain(spec: str) -> ConvexDomain:
    """Parse ``ball:<c>:<r>``, ``box:<lo>:<hi>``, ``interval:<lo>:<hi>``,
    ``segment:<a>:<b>`` with an optional ``@p=<p>`` suffix (default 2)."""
    body, _, suffix = spec.strip().partition("@")
    p = 2.0
    if suffix:
        key, _, val = suffix.partition("=")
        if key.strip() != "p" or not val:
            raise SpecSyntax(f"bad domain suffix {suffix!r}; expected @p=<p>")
        try:
            p = parse_p(val)
        except ValueError:
            raise SpecSyntax(f"bad norm exponent {val!r}") from None
        if not p > 1:
            raise SpecSyntax(f"norm exponent must exceed 1, got {val}")
    parts = body.split(":")
    kind = parts[0].strip().lower()
    if len(parts) != 3:
        raise SpecSyntax(f"domain spec {spec!r} must have the form kind:<a>:<b>")
    if kind == "interval":
        try:
            lo, hi = float(parts[1]), float(parts[2])
        except ValueError:
            raise SpecSyntax(f"bad interval bounds in {spec!r}") from None
        return Interval(lo, hi, p=p)
    if kind == "ball":
        c = _csv(parts[1], "center")
        try:
            r = float(parts[2])
        except ValueError:
            raise SpecSyntax(f"bad radius in {spec!r}") from None
        if not r > 0:
            raise NonpositiveRadius(f"ball radius must be positive, got {r}")
        return Ball(c, r, SpaceSpec(c.shape[0], p))
    if kind == "box":
        lo, hi = _csv(parts[1], "lo"), _csv(parts[2], "hi")
        if lo.shape != hi.shape:
            raise SpecSyntax("box corners have different dimensions")
        if lo.shape[0] == 1:
            return Interval(float(lo[0]), float(hi[0]), p=p) if lo[0] <= hi[0] else Box(lo, hi)
        return Box(lo, hi, SpaceSpec(lo.shape[0], p))
    if kind == "segment":
        a, b = _csv(parts[1], "a"), _csv(parts[2], "b")
        if a.shape != b.shape:
            raise SpecSyntax("segment endpoints have different dimensions")
        return Segment(a, b, SpaceSpec(a.shape[0], p))
    raise SpecSyntax(f"unknown domain kind {kind!r}")

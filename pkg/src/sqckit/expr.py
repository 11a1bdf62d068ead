"""Extended-real function expressions on R^n.

Values are float64 arrays where ``+inf`` stands for the top element of the
extended reals; ``-inf`` and NaN are never legitimate results. Every node is
immutable and evaluates a whole batch of points at once::

    f = Scale(2.0, Norm(SpaceSpec(3)))
    f.evaluate(np.ones((5, 3)))
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyFamily,
    EvaluationError,
    InnerSearchBudgetExceeded,
    InvalidConstant,
    NegativeConstant,
    NonpositiveScalar,
    UnboundedBelowDetected,
)
from .geometry import Box, ConvexDomain, Interval, SpaceSpec, format_p, pnorm
from .spaces import GaugeBody

INF = math.inf
DEFAULT_INNER_GRID = 2049
DEFAULT_INNER_GRID_2D = 257
GOLDEN_STEPS = 40
_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _as_batch(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    if X.shape[1] != dim:
        raise DimensionMismatch(f"expression expects points in R^{dim}, got R^{X.shape[1]}")
    return X


def _p_json(p):
    return format_p(p) if p == INF else p


class Expr:
    """Base node. Subclasses set ``kind`` and implement ``_eval``."""

    kind = ""
    dim: int = 1

    def evaluate(self, X) -> np.ndarray:
        X = _as_batch(X, self.dim)
        return self._eval(X)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return float(self.evaluate(x)[0])

    def _eval(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def children(self) -> tuple:
        return ()

    def special_points(self) -> np.ndarray:
        """Points where the expression is known to be irregular (dips, kinks)."""
        return np.empty((0, self.dim))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


def _cat_points(parts, dim):
    parts = [np.asarray(p, dtype=np.float64).reshape(-1, dim) for p in parts if len(p)]
    if not parts:
        return np.empty((0, dim))
    return np.unique(np.vstack(parts), axis=0)


# ---------------------------------------------------------------- atoms


@dataclass(frozen=True, eq=False, repr=False)
class Atom(Expr):
    """Atoms may carry a user-declared sigma and a convexity flag."""

    def _decl(self, d: dict) -> dict:
        if getattr(self, "sigma", None) is not None:
            d["sigma"] = self.sigma
        if getattr(self, "convex", None) is not None:
            d["convex"] = self.convex
        return d

    def _check_sigma(self):
        _floatify(self, "sigma")
        s = getattr(self, "sigma", None)
        if s is not None and not (s >= 0):
            raise NegativeConstant(f"declared sigma must be nonnegative, got {s}")

    @property
    def is_convex(self) -> bool:
        c = getattr(self, "convex", None)
        return bool(c) if c is not None else self._convex_default()

    def _convex_default(self) -> bool:
        return False


@dataclass(frozen=True, eq=False, repr=False)
class Norm(Atom):
    space: SpaceSpec
    sigma: float | None = None
    convex: bool | None = None
    kind = "norm"

    def __post_init__(self):
        self._check_sigma()

    @property
    def dim(self):
        return self.space.dim

    def _eval(self, X):
        return pnorm(X, self.space.p)

    def special_points(self):
        return np.zeros((1, self.dim))

    def _convex_default(self):
        return True

    def to_dict(self):
        return self._decl({"kind": self.kind, "dim": self.space.dim, "p": _p_json(self.space.p)})


@dataclass(frozen=True, eq=False, repr=False)
class PowerNorm(Atom):
    """``|x|^a`` with ``0 < a < 1``."""

    space: SpaceSpec
    a: float
    sigma: float | None = None
    convex: bool | None = None
    kind = "power_norm"

    def __post_init__(self):
        from .errors import ExponentOutOfRange

        if not (0.0 < self.a < 1.0):
            raise ExponentOutOfRange(f"power exponent must lie in (0, 1), got {self.a}")
        self._check_sigma()

    @property
    def dim(self):
        return self.space.dim

    def _eval(self, X):
        return pnorm(X, self.space.p) ** self.a

    def special_points(self):
        return np.zeros((1, self.dim))

    def to_dict(self):
        return self._decl({"kind": self.kind, "dim": self.space.dim, "p": _p_json(self.space.p),
                           "a": self.a})


@dataclass(frozen=True, eq=False, repr=False)
class Gauge(Atom):
    body: GaugeBody
    sigma: float | None = None
    convex: bool | None = None
    kind = "gauge"

    def __post_init__(self):
        self._check_sigma()

    @property
    def dim(self):
        return self.body.dim

    def _eval(self, X):
        return self.body.gauge(X)

    def special_points(self):
        return np.zeros((1, self.dim))

    def _convex_default(self):
        return True

    def to_dict(self):
        return self._decl({"kind": self.kind, "body": self.body.to_dict()})


@dataclass(frozen=True, eq=False, repr=False)
class Poly1D(Atom):
    """Polynomial with coefficients in ascending order of degree."""

    coefficients: tuple
    sigma: float | None = None
    convex: bool | None = None
    kind = "poly1d"
    dim = 1

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        if not c or not all(math.isfinite(v) for v in c):
            raise InvalidConstant("polynomial needs at least one finite coefficient")
        object.__setattr__(self, "coefficients", c)
        self._check_sigma()

    def _eval(self, X):
        return np.polyval(self.coefficients[::-1], X[:, 0])

    def special_points(self):
        c = np.array(self.coefficients)
        if c.size < 3:
            return np.empty((0, 1))
        der = np.polyder(c[::-1])
        r = np.roots(der) if np.any(der != 0) else np.array([])
        r = np.real(r[np.abs(np.imag(r)) < 1e-12])
        return np.sort(r).reshape(-1, 1)

    def _convex_default(self):
        c = self.coefficients
        if len(c) <= 2:
            return True
        return len(c) == 3 and c[2] >= 0

    def to_dict(self):
        return self._decl({"kind": self.kind, "coefficients": list(self.coefficients)})


@dataclass(frozen=True, eq=False, repr=False)
class Abs1D(Atom):
    sigma: float | None = None
    convex: bool | None = None
    kind = "abs1d"
    dim = 1

    def __post_init__(self):
        self._check_sigma()

    def _eval(self, X):
        return np.abs(X[:, 0])

    def special_points(self):
        return np.zeros((1, 1))

    def _convex_default(self):
        return True

    def to_dict(self):
        return self._decl({"kind": self.kind})


@dataclass(frozen=True, eq=False, repr=False)
class Linear1D(Atom):
    slope: float = 1.0
    intercept: float = 0.0
    sigma: float | None = None
    convex: bool | None = None
    kind = "linear1d"
    dim = 1

    def __post_init__(self):
        _floatify(self, "slope", "intercept")
        self._check_sigma()

    def _eval(self, X):
        return self.slope * X[:, 0] + self.intercept

    def _convex_default(self):
        return True

    def to_dict(self):
        return self._decl({"kind": self.kind, "slope": self.slope, "intercept": self.intercept})


@dataclass(frozen=True, eq=False, repr=False)
class QuadDip(Atom):
    """``x^2`` away from the origin and ``-1`` at the origin."""

    sigma: float | None = None
    convex: bool | None = None
    kind = "quad_dip"
    dim = 1

    def __post_init__(self):
        self._check_sigma()

    def _eval(self, X):
        x = X[:, 0]
        return np.where(x == 0.0, -1.0, x * x)

    def special_points(self):
        return np.zeros((1, 1))

    def to_dict(self):
        return self._decl({"kind": self.kind})


@dataclass(frozen=True, eq=False, repr=False)
class Piecewise1D(Atom):
    """Pieces on ``(-inf, b1), [b1, b2), ..., [bk, inf)``.

    A piece of ``None`` means ``+inf`` on that interval. Overrides
    ``(x0, value)`` win at exactly ``x == x0``.
    """

    breakpoints: tuple
    pieces: tuple
    overrides: tuple = ()
    sigma: float | None = None
    convex: bool | None = None
    kind = "piecewise1d"
    dim = 1

    def __post_init__(self):
        b = tuple(float(v) for v in self.breakpoints)
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise InvalidConstant("breakpoints must be strictly increasing")
        if len(self.pieces) != len(b) + 1:
            raise InvalidConstant(f"{len(b)} breakpoints need {len(b) + 1} pieces, got {len(self.pieces)}")
        for p in self.pieces:
            if p is not None and p.dim != 1:
                raise DimensionMismatch("piecewise pieces must be 1-D expressions")
        ov = tuple((float(x), float(v)) for x, v in self.overrides)
        for _, v in ov:
            if v == -INF or math.isnan(v):
                raise InvalidConstant("override values must be finite or +inf")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "overrides", ov)
        self._check_sigma()

    def _eval(self, X):
        x = X[:, 0]
        out = np.full(x.shape, INF)
        which = np.searchsorted(np.array(self.breakpoints), x, side="right")
        for k, piece in enumerate(self.pieces):
            sel = which == k
            if piece is not None and sel.any():
                out[sel] = piece.evaluate(X[sel])
        for x0, v in self.overrides:
            out[x == x0] = v
        return out

    def children(self):
        return tuple(p for p in self.pieces if p is not None)

    def special_points(self):
        pts = [np.array(self.breakpoints), np.array([x for x, _ in self.overrides])]
        return _cat_points(pts, 1)

    def to_dict(self):
        return self._decl({
            "kind": self.kind,
            "breakpoints": list(self.breakpoints),
            "pieces": [None if p is None else p.to_dict() for p in self.pieces],
            "overrides": [{"x": x, "value": v} for x, v in self.overrides],
        })


@dataclass(frozen=True, eq=False, repr=False)
class Table1D(Atom):
    """Linear interpolation of tabulated values; ``+inf`` off the grid."""

    grid: tuple
    values: tuple
    sigma: float | None = None
    convex: bool | None = None
    kind = "table1d"
    dim = 1

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise InvalidConstant("table needs matching grid and values with at least 2 points")
        if np.any(np.diff(g) <= 0):
            raise InvalidConstant("table grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise InvalidConstant("table values must be finite")
        object.__setattr__(self, "grid", tuple(g.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))
        self._check_sigma()

    def _eval(self, X):
        x = X[:, 0]
        g = np.array(self.grid)
        out = np.interp(x, g, np.array(self.values))
        out[(x < g[0]) | (x > g[-1])] = INF
        return out

    def to_dict(self):
        return self._decl({"kind": self.kind, "grid": list(self.grid), "values": list(self.values)})


# ---------------------------------------------------------------- combinators


def _floatify(obj, *names):
    for name in names:
        v = getattr(obj, name)
        if v is not None:
            object.__setattr__(obj, name, float(v))


def _check_child(child, dim=None):
    if not isinstance(child, Expr):
        raise TypeError(f"expected an expression, got {type(child).__name__}")
    if dim is not None and child.dim != dim:
        raise DimensionMismatch(f"child expects R^{child.dim}, wired to R^{dim}")


@dataclass(frozen=True, eq=False, repr=False)
class Scale(Expr):
    c: float
    child: Expr
    kind = "scale"

    def __post_init__(self):
        _floatify(self, "c")
        if not (self.c > 0) or not math.isfinite(self.c):
            raise NonpositiveScalar(f"scale factor must be positive and finite, got {self.c}")
        _check_child(self.child)

    @property
    def dim(self):
        return self.child.dim

    def _eval(self, X):
        return self.c * self.child._eval(X)

    def children(self):
        return (self.child,)

    def special_points(self):
        return self.child.special_points()

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "child": self.child.to_dict()}


@dataclass(frozen=True, eq=False, repr=False)
class AddConstant(Expr):
    k: float
    child: Expr
    kind = "add_constant"

    def __post_init__(self):
        _floatify(self, "k")
        if not math.isfinite(self.k):
            raise InvalidConstant("added constant must be finite")
        _check_child(self.child)

    @property
    def dim(self):
        return self.child.dim

    def _eval(self, X):
        return self.child._eval(X) + self.k

    def children(self):
        return (self.child,)

    def special_points(self):
        return self.child.special_points()

    def to_dict(self):
        return {"kind": self.kind, "k": self.k, "child": self.child.to_dict()}


@dataclass(frozen=True, eq=False, repr=False)
class ComposeMonotone(Expr):
    """``outer(inner(x))`` with a nondecreasing 1-D outer function.

    ``ell`` is the lower-Lipschitz constant of the inner function,
    ``outer_interval`` the interval on which the outer function is
    declared nondecreasing and sigma-quasiconvex.
    """

    outer: Expr
    inner: Expr
    ell: float | None = None
    outer_interval: tuple | None = None
    kind = "compose"

    def __post_init__(self):
        _floatify(self, "ell")
        _check_child(self.outer, 1)
        _check_child(self.inner)
        if self.ell is not None and not (self.ell >= 0):
            raise NegativeConstant(f"lower-Lipschitz constant must be >= 0, got {self.ell}")
        if self.outer_interval is not None:
            lo, hi = (float(v) for v in self.outer_interval)
            if lo > hi:
                raise InvalidConstant("outer interval has lo > hi")
            object.__setattr__(self, "outer_interval", (lo, hi))

    @property
    def dim(self):
        return self.inner.dim

    def _eval(self, X):
        t = self.inner._eval(X)
        out = np.full(t.shape, INF)
        fin = np.isfinite(t)
        if fin.any():
            out[fin] = self.outer._eval(t[fin].reshape(-1, 1))
        return out

    def children(self):
        return (self.outer, self.inner)

    def special_points(self):
        return self.inner.special_points()

    def to_dict(self):
        d = {"kind": self.kind, "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}
        if self.ell is not None:
            d["ell"] = self.ell
        if self.outer_interval is not None:
            d["outer_interval"] = list(self.outer_interval)
        return d


@dataclass(frozen=True, eq=False, repr=False)
class _Family(Expr):
    items: tuple
    kind = ""

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise EmptyFamily(f"{self.kind} needs at least one child")
        for c in items:
            _check_child(c, items[0].dim)
        object.__setattr__(self, "items", items)

    @property
    def dim(self):
        return self.items[0].dim

    def children(self):
        return self.items

    def special_points(self):
        return _cat_points([c.special_points() for c in self.items], self.dim)

    def _stack(self, X):
        return np.stack([c._eval(X) for c in self.items])

    def to_dict(self):
        return {"kind": self.kind, "children": [c.to_dict() for c in self.items]}


class Sup(_Family):
    """Pointwise supremum of a finite, explicitly listed family."""

    kind = "sup"

    def _eval(self, X):
        return np.max(self._stack(X), axis=0)


class MaxFinite(_Family):
    kind = "max"

    def _eval(self, X):
        return np.max(self._stack(X), axis=0)


class Min(_Family):
    """Pointwise minimum (no calculus rule; kept for negative fixtures)."""

    kind = "min"

    def _eval(self, X):
        return np.min(self._stack(X), axis=0)


class Sum(_Family):
    """Pointwise sum (no calculus rule: sums are not closed)."""

    kind = "sum"

    def _eval(self, X):
        return np.sum(self._stack(X), axis=0)


@dataclass(frozen=True, eq=False, repr=False)
class AffinePre(Expr):
    """``child(A x + b)``; ``gamma`` bounds ``|x| <= gamma |A x|``."""

    A: np.ndarray
    b: np.ndarray
    child: Expr
    gamma: float | None = None
    kind = "affine_pre"

    def __post_init__(self):
        _floatify(self, "gamma")
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidConstant("affine map entries must be finite")
        _check_child(self.child, A.shape[0])
        if b.shape[0] != A.shape[0]:
            raise DimensionMismatch("affine offset length must equal the number of rows of A")
        if self.gamma is not None and not self.gamma > 0:
            from .errors import NonpositiveGamma

            raise NonpositiveGamma(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.A.shape[1]

    def _eval(self, X):
        return self.child._eval(X @ self.A.T + self.b)

    def children(self):
        return (self.child,)

    def special_points(self):
        P = self.child.special_points()
        if not len(P) or self.A.shape[0] != self.A.shape[1]:
            return np.empty((0, self.dim))
        try:
            return np.linalg.solve(self.A, (P - self.b).T).T
        except np.linalg.LinAlgError:
            return np.empty((0, self.dim))

    def to_dict(self):
        d = {"kind": self.kind, "A": self.A.tolist(), "b": self.b.tolist(), "child": self.child.to_dict()}
        if self.gamma is not None:
            d["gamma"] = self.gamma
        return d


@dataclass(frozen=True, eq=False, repr=False)
class Shift(Expr):
    """``x -> child(x + offset)``."""

    offset: np.ndarray
    child: Expr
    kind = "shift"

    def __post_init__(self):
        off = np.atleast_1d(np.asarray(self.offset, dtype=np.float64)).reshape(-1)
        _check_child(self.child, off.shape[0])
        object.__setattr__(self, "offset", off)

    @property
    def dim(self):
        return self.child.dim

    def _eval(self, X):
        return self.child._eval(X + self.offset)

    def children(self):
        return (self.child,)

    def special_points(self):
        P = self.child.special_points()
        return P - self.offset if len(P) else P

    def to_dict(self):
        return {"kind": self.kind, "offset": self.offset.tolist(), "child": self.child.to_dict()}


@dataclass(frozen=True, eq=False, repr=False)
class Restrict(Expr):
    """1-D restriction ``t -> child(u + t (x - u))``.

    With ``unit_speed`` the direction is normalised in the p-norm so ``t``
    runs over ``[0, |x - u|]``.
    """

    child: Expr
    u: np.ndarray
    x: np.ndarray
    unit_speed: bool = False
    p: float = 2.0
    kind = "restrict"
    dim = 1

    def __post_init__(self):
        _floatify(self, "p")
        u = np.asarray(self.u, dtype=np.float64).reshape(-1)
        x = np.asarray(self.x, dtype=np.float64).reshape(-1)
        _check_child(self.child, u.shape[0])
        if x.shape != u.shape:
            raise DimensionMismatch("segment endpoints differ in dimension")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "x", x)

    @property
    def length(self) -> float:
        return float(pnorm(self.x - self.u, self.p))

    @property
    def direction(self) -> np.ndarray:
        d = self.x - self.u
        if self.unit_speed:
            L = self.length
            return d / L if L > 0 else d
        return d

    def _eval(self, X):
        return self.child._eval(self.u + X[:, :1] * self.direction)

    def children(self):
        return (self.child,)

    def param_interval(self) -> Interval:
        return Interval(0.0, self.length if self.unit_speed else 1.0)

    def to_dict(self):
        return {"kind": self.kind, "child": self.child.to_dict(), "u": self.u.tolist(),
                "x": self.x.tolist(), "unit_speed": self.unit_speed, "p": _p_json(self.p)}


@dataclass(frozen=True, eq=False, repr=False)
class Separable(Expr):
    """``(x1, x2) -> left(x1) + right(x2)`` on the product space."""

    left: Expr
    right: Expr
    kind = "separable_sum"

    def __post_init__(self):
        _check_child(self.left)
        _check_child(self.right)

    @property
    def dim(self):
        return self.left.dim + self.right.dim

    def _eval(self, X):
        k = self.left.dim
        return self.left._eval(X[:, :k]) + self.right._eval(X[:, k:])

    def children(self):
        return (self.left, self.right)

    def to_dict(self):
        return {"kind": self.kind, "left": self.left.to_dict(), "right": self.right.to_dict()}


# ---------------------------------------------------------------- inner search


def _inner_grid(T: ConvexDomain, n1: int, n2: int) -> np.ndarray:
    lo, hi = T.bounding_box()
    if T.dim == 1:
        return np.linspace(lo[0], hi[0], n1).reshape(-1, 1)
    if T.dim == 2:
        g0 = np.linspace(lo[0], hi[0], n2)
        g1 = np.linspace(lo[1], hi[1], n2)
        G = np.stack(np.meshgrid(g0, g1, indexing="ij"), axis=-1).reshape(-1, 2)
        return G[T.contains(G, tol=1e-12)]
    raise DimensionMismatch("inner variables are limited to 1-D or 2-D")


def _grid_axis(T, n1, n2):
    return n1 if T.dim == 1 else n2


@dataclass(frozen=True)
class InnerSearch:
    """Bounded inner optimisation: dense grid then local refinement.

    ``truncated`` marks artificial bounds (the true feasible set is larger);
    a boundary optimum with values still improving then raises
    ``UnboundedBelowDetected``.
    """

    domain: ConvexDomain
    grid: int | None = None
    steps: int = GOLDEN_STEPS
    tol: float | None = None
    truncated: bool = False

    def __post_init__(self):
        if self.domain.dim not in (1, 2):
            raise DimensionMismatch("inner variables are limited to 1-D or 2-D")
        if self.grid is not None and self.grid < 3:
            raise InvalidConstant("inner grid needs at least 3 points per axis")

    @property
    def n_axis(self) -> int:
        if self.grid is not None:
            return int(self.grid)
        return DEFAULT_INNER_GRID if self.domain.dim == 1 else DEFAULT_INNER_GRID_2D

    def run(self, fun, m: int, maximize: bool = False, chunk_cells: int = 2_000_000) -> np.ndarray:
        """Optimise ``fun(rows, T)`` for each of ``m`` query rows.

        ``fun`` receives row indices (k,) and inner points (k, G, d) and
        returns values (k, G).
        """
        T = self.domain
        G = _inner_grid(T, self.n_axis, self.n_axis)
        sgn = -1.0 if maximize else 1.0
        out = np.empty(m)
        rows_per = max(1, chunk_cells // max(G.shape[0], 1))
        for start in range(0, m, rows_per):
            rows = np.arange(start, min(m, start + rows_per))
            vals = sgn * fun(rows, np.broadcast_to(G, (rows.size,) + G.shape))
            if np.any(np.isnan(vals)):
                raise EvaluationError("inner objective produced NaN")
            k = np.argmin(vals, axis=1)
            best = vals[np.arange(rows.size), k]
            if self.truncated and not maximize:
                self._check_boundary(vals, k, G)
            if T.dim == 1:
                refined = self._golden(fun, rows, G[:, 0], k, sgn)
            else:
                refined = self._pattern(fun, rows, G, k, sgn)
            out[rows] = sgn * np.minimum(best, refined)
        return out

    def _check_boundary(self, vals, k, G):
        if self.domain.dim != 1:
            n = G.shape[0]
            lo, hi = self.domain.bounding_box()
            on_edge = np.any((G[k] <= lo + 1e-15) | (G[k] >= hi - 1e-15), axis=1)
            fin = np.isfinite(vals[np.arange(vals.shape[0]), k])
            if np.any(on_edge & fin):
                raise UnboundedBelowDetected("inner minimum sits on the truncated inner-domain boundary")
            return
        n = vals.shape[1]
        r = np.arange(vals.shape[0])
        left = (k == 0) & np.isfinite(vals[r, 0]) & (vals[r, 0] < vals[r, 1])
        right = (k == n - 1) & np.isfinite(vals[r, n - 1]) & (vals[r, n - 1] < vals[r, n - 2])
        if np.any(left | right):
            raise UnboundedBelowDetected(
                "inner minimum sits on the truncated inner-domain boundary with values still decreasing")

    def _golden(self, fun, rows, g, k, sgn):
        n = g.size
        a = g[np.maximum(k - 1, 0)]
        b = g[np.minimum(k + 1, n - 1)]

        def f(t):
            return sgn * fun(rows, t.reshape(-1, 1, 1))[:, 0]

        c = b - _PHI * (b - a)
        d = a + _PHI * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(self.steps):
            left = fc < fd
            # left: [a, d] survives, old c becomes the new d
            # right: [c, b] survives, old d becomes the new c
            b = np.where(left, d, b)
            a = np.where(left, a, c)
            c_new = np.where(left, b - _PHI * (b - a), d)
            d_new = np.where(left, c, a + _PHI * (b - a))
            fnew = f(np.where(left, c_new, d_new))
            fc, fd = np.where(left, fnew, fd), np.where(left, fc, fnew)
            c, d = c_new, d_new
        if self.tol is not None and np.any(b - a > self.tol):
            raise InnerSearchBudgetExceeded(
                f"inner bracket {float(np.max(b - a)):.3g} above tolerance {self.tol:.3g} "
                f"after {self.steps} steps")
        return np.minimum(fc, fd)

    def _pattern(self, fun, rows, G, k, sgn):
        T = self.domain
        lo, hi = T.bounding_box()
        step = (hi - lo) / (self.n_axis - 1)
        cur = G[k].copy()
        fcur = sgn * fun(rows, cur[:, None, :])[:, 0]
        h = np.tile(step, (rows.size, 1))
        dirs = np.array([[1, 0], [-1, 0], [0, 1], [-1, -1], [0, -1], [1, 1], [1, -1], [-1, 1]], float)
        for _ in range(self.steps):
            cand = cur[:, None, :] + dirs[None, :, :] * h[:, None, :]
            flat = cand.reshape(-1, 2)
            inside = T.contains(flat, tol=1e-12).reshape(rows.size, -1)
            fv = sgn * fun(rows, cand)
            fv = np.where(inside, fv, INF)
            j = np.argmin(fv, axis=1)
            fb = fv[np.arange(rows.size), j]
            better = fb < fcur
            cur = np.where(better[:, None], cand[np.arange(rows.size), j], cur)
            fcur = np.where(better, fb, fcur)
            h = np.where(better[:, None], h, 0.5 * h)
        if self.tol is not None and np.any(np.max(h, axis=1) > self.tol):
            raise InnerSearchBudgetExceeded("2-D inner refinement did not reach the declared tolerance")
        return fcur

    def to_dict(self):
        d = {"inner_domain": self.domain.to_spec()}
        if self.grid is not None:
            d["grid"] = self.grid
        if self.steps != GOLDEN_STEPS:
            d["steps"] = self.steps
        if self.tol is not None:
            d["inner_tol"] = self.tol
        return d


# ---------------------------------------------------------------- map descriptors


@dataclass(frozen=True, eq=False)
class AffineGraph:
    """Single-valued ``x -> A x + b``."""

    A: np.ndarray
    b: np.ndarray
    gamma: float | None = None
    ell: float | None = None
    kind = "affine_graph"

    def __post_init__(self):
        _floatify(self, "gamma", "ell")
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=np.float64)))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64).reshape(-1))

    @property
    def in_dim(self):
        return self.A.shape[1]

    @property
    def out_dim(self):
        return self.A.shape[0]

    def to_dict(self):
        return _map_dict(self, A=self.A.tolist(), b=self.b.tolist())


@dataclass(frozen=True, eq=False)
class AffinePreimage:
    """``x -> {y : A y + b = x}``."""

    A: np.ndarray
    b: np.ndarray
    gamma: float | None = None
    ell: float | None = None
    kind = "affine_preimage"

    def __post_init__(self):
        _floatify(self, "gamma", "ell")
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        if not np.any(A != 0):
            from .errors import ZeroOperator

            raise ZeroOperator("affine preimage needs a nonzero operator")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64).reshape(-1))

    @property
    def in_dim(self):
        return self.A.shape[0]

    @property
    def out_dim(self):
        return self.A.shape[1]

    def null_basis(self) -> np.ndarray:
        _, s, vt = np.linalg.svd(self.A)
        rank = int(np.sum(s > 1e-12 * max(s.max(), 1.0)))
        return vt[rank:].T

    def to_dict(self):
        return _map_dict(self, A=self.A.tolist(), b=self.b.tolist())


@dataclass(frozen=True, eq=False)
class SumSplit:
    """``x -> {(x1, x2) : x1 + x2 = x}``; 1-expansive for the sum norm."""

    dim: int = 1
    gamma: float | None = None
    ell: float | None = None
    kind = "sum_split"

    def __post_init__(self):
        _floatify(self, "gamma", "ell")

    @property
    def in_dim(self):
        return self.dim

    @property
    def out_dim(self):
        return 2 * self.dim

    def to_dict(self):
        return _map_dict(self, dim=self.dim)


@dataclass(frozen=True, eq=False)
class ProductSlice:
    """``x -> {C x + t : t in inner}`` (``C = 0`` by default).

    Convex graph and an affine process, so it serves both the marginal-min
    and the sup-value rules.
    """

    inner: ConvexDomain
    in_dim: int = 1
    C: np.ndarray | None = None
    gamma: float | None = None
    ell: float | None = None
    kind = "product_slice"

    def __post_init__(self):
        _floatify(self, "gamma", "ell")
        if self.C is not None:
            C = np.atleast_2d(np.asarray(self.C, dtype=np.float64))
            if C.shape != (self.inner.dim, self.in_dim):
                raise DimensionMismatch(f"coupling must be {self.inner.dim}x{self.in_dim}")
            object.__setattr__(self, "C", C)

    @property
    def out_dim(self):
        return self.inner.dim

    def offsets(self, X):
        if self.C is None:
            return np.zeros((X.shape[0], self.inner.dim))
        return X @ self.C.T

    def to_dict(self):
        d = {"inner_domain": self.inner.to_spec(), "in_dim": self.in_dim}
        if self.C is not None:
            d["C"] = self.C.tolist()
        return _map_dict(self, **d)


MapDescriptor = AffineGraph | AffinePreimage | SumSplit | ProductSlice


def _map_dict(m, **fields):
    d = {"kind": m.kind, **fields}
    if m.gamma is not None:
        d["gamma"] = m.gamma
    if m.ell is not None:
        d["ell"] = m.ell
    return d


# ---------------------------------------------------------------- value functions


def _joint_sigma_ok(obj):
    _floatify(obj, "joint_sigma")
    s = obj.joint_sigma
    if s is not None and not s >= 0:
        raise NegativeConstant(f"joint sigma must be nonnegative, got {s}")


@dataclass(frozen=True, eq=False, repr=False)
class InfConv(Expr):
    """``x -> inf_t left(t) + right(x - t)`` with ``t`` in a bounded inner domain."""

    left: Expr
    right: Expr
    search: InnerSearch
    joint_sigma: float | None = None
    kind = "infconv"

    def __post_init__(self):
        _check_child(self.left)
        _check_child(self.right, self.left.dim)
        if self.search.domain.dim != self.left.dim:
            raise DimensionMismatch("inner domain must live in the same space as the arguments")
        _joint_sigma_ok(self)

    @property
    def dim(self):
        return self.left.dim

    def joint(self) -> Separable:
        return Separable(self.left, self.right)

    def _eval(self, X):
        n = self.dim
        search = InnerSearch(self.search.domain, self.search.grid, self.search.steps, self.search.tol, True)

        def fun(rows, T):
            k, G = T.shape[0], T.shape[1]
            flat = T.reshape(-1, n)
            xs = np.repeat(X[rows], G, axis=0)
            return (self.left._eval(flat) + self.right._eval(xs - flat)).reshape(k, G)

        return search.run(fun, X.shape[0])

    def children(self):
        return (self.left, self.right)

    def to_dict(self):
        d = {"kind": self.kind, "left": self.left.to_dict(), "right": self.right.to_dict(),
             **self.search.to_dict()}
        if self.joint_sigma is not None:
            d["joint_sigma"] = self.joint_sigma
        return d


@dataclass(frozen=True, eq=False, repr=False)
class ValueFn(Expr):
    """Marginal ``mu(x) = inf{ child(y) : y in F(x) }`` for an affine-graph,
    affine-preimage or sum-split map ``F``. ``inf`` of an empty image is
    ``+inf``."""

    child: Expr
    map: object
    search: InnerSearch | None = None
    kind = "value_fn"

    def __post_init__(self):
        _check_child(self.child)
        m = self.map
        if isinstance(m, ProductSlice):
            raise InvalidConstant("use MarginalMin for product slices")
        if not isinstance(m, (AffineGraph, AffinePreimage, SumSplit)):
            raise InvalidConstant(f"unsupported map descriptor {type(m).__name__}")
        if m.out_dim != self.child.dim:
            raise DimensionMismatch(f"map lands in R^{m.out_dim} but child expects R^{self.child.dim}")
        if isinstance(m, AffineGraph) and m.b.shape[0] != m.out_dim:
            raise DimensionMismatch("affine offset length mismatch")
        if isinstance(m, AffinePreimage):
            if m.b.shape[0] != m.in_dim:
                raise DimensionMismatch("affine offset length mismatch")
            if self._null().shape[1] > 0 and self.search is None:
                raise InvalidConstant("non-injective preimage needs an inner search domain")
        if isinstance(m, SumSplit) and self.search is None:
            raise InvalidConstant("sum split needs an inner search domain")
        if self.search is not None and isinstance(m, (SumSplit, AffinePreimage)):
            need = m.dim if isinstance(m, SumSplit) else self._null().shape[1]
            if self.search.domain.dim != need:
                raise DimensionMismatch(f"inner domain must be {need}-dimensional")

    def _null(self):
        return self.map.null_basis()

    @property
    def dim(self):
        return self.map.in_dim

    def _eval(self, X):
        m = self.map
        if isinstance(m, AffineGraph):
            return self.child._eval(X @ m.A.T + m.b)
        if isinstance(m, SumSplit):
            n = m.dim
            search = InnerSearch(self.search.domain, self.search.grid, self.search.steps, self.search.tol, True)

            def fun(rows, T):
                k, G = T.shape[0], T.shape[1]
                flat = T.reshape(-1, n)
                xs = np.repeat(X[rows], G, axis=0)
                return self.child._eval(np.hstack([flat, xs - flat])).reshape(k, G)

            return search.run(fun, X.shape[0])
        # affine preimage
        A, b = m.A, m.b
        rhs = X - b
        Y0 = np.linalg.lstsq(A, rhs.T, rcond=None)[0].T
        resid = pnorm(Y0 @ A.T - rhs, 2.0)
        scale = 1.0 + pnorm(rhs, 2.0)
        empty = resid > 1e-10 * scale
        N = self._null()
        out = np.full(X.shape[0], INF)
        ok = ~empty
        if not ok.any():
            return out
        if N.shape[1] == 0:
            out[ok] = self.child._eval(Y0[ok])
            return out
        Yk = Y0[ok]
        search = InnerSearch(self.search.domain, self.search.grid, self.search.steps, self.search.tol, True)

        def fun(rows, T):
            k, G = T.shape[0], T.shape[1]
            Y = Yk[rows][:, None, :] + T @ N.T
            return self.child._eval(Y.reshape(-1, Y.shape[-1])).reshape(k, G)

        out[ok] = search.run(fun, Yk.shape[0])
        return out

    def children(self):
        return (self.child,)

    def special_points(self):
        m = self.map
        P = self.child.special_points()
        if not len(P):
            return np.empty((0, self.dim))
        if isinstance(m, AffinePreimage):
            return P @ m.A.T + m.b
        if isinstance(m, AffineGraph) and m.A.shape[0] == m.A.shape[1]:
            try:
                return np.linalg.solve(m.A, (P - m.b).T).T
            except np.linalg.LinAlgError:
                pass
        return np.empty((0, self.dim))

    def to_dict(self):
        d = {"kind": self.kind, "child": self.child.to_dict(), "map": self.map.to_dict()}
        if self.search is not None:
            d.update(self.search.to_dict())
        return d


@dataclass(frozen=True, eq=False, repr=False)
class _SliceValue(Expr):
    joint: Expr
    map: ProductSlice
    product_p: float = 2.0
    joint_sigma: float | None = None
    grid: int | None = None
    steps: int = GOLDEN_STEPS
    inner_tol: float | None = None
    kind = ""

    def __post_init__(self):
        _check_child(self.joint)
        if not isinstance(self.map, ProductSlice):
            raise InvalidConstant(f"{self.kind} needs a product-slice map descriptor")
        if self.joint.dim != self.map.in_dim + self.map.out_dim:
            raise DimensionMismatch(
                f"joint expects R^{self.joint.dim}, product is R^{self.map.in_dim}+R^{self.map.out_dim}")
        _floatify(self, "product_p")
        if not self.product_p >= 1:
            raise InvalidConstant("product norm exponent must be >= 1")
        _joint_sigma_ok(self)

    @property
    def dim(self):
        return self.map.in_dim

    def _search(self):
        return InnerSearch(self.map.inner, self.grid, self.steps, self.inner_tol, False)

    def _run(self, X, maximize):
        off = self.map.offsets(X)

        def fun(rows, T):
            k, G = T.shape[0], T.shape[1]
            Y = off[rows][:, None, :] + T
            xs = np.repeat(X[rows], G, axis=0)
            return self.joint._eval(np.hstack([xs, Y.reshape(-1, Y.shape[-1])])).reshape(k, G)

        return self._search().run(fun, X.shape[0], maximize=maximize)

    def children(self):
        return (self.joint,)

    def to_dict(self):
        d = {"kind": self.kind, "joint": self.joint.to_dict(), "map": self.map.to_dict(),
             "product_p": _p_json(self.product_p)}
        if self.joint_sigma is not None:
            d["joint_sigma"] = self.joint_sigma
        if self.grid is not None:
            d["grid"] = self.grid
        if self.steps != GOLDEN_STEPS:
            d["steps"] = self.steps
        if self.inner_tol is not None:
            d["inner_tol"] = self.inner_tol
        return d


class MarginalMin(_SliceValue):
    """``v(x) = inf{ joint(x, y) : y in F(x) }``."""

    kind = "marginal_min"

    def _eval(self, X):
        return self._run(X, maximize=False)


class SupValue(_SliceValue):
    """``V(x) = sup{ joint(x, y) : y in F(x) }``."""

    kind = "sup_value"

    def _eval(self, X):
        return self._run(X, maximize=True)


# ---------------------------------------------------------------- helpers


def evaluate(expr: Expr, x) -> float | np.ndarray:
    """Checked evaluation; a single point returns a float.

    Raises ``EvaluationError`` if the result contains ``-inf`` or NaN.
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 0 or (X.ndim == 1 and (expr.dim > 1 or X.shape[0] == 1))
    out = expr.evaluate(X)
    if np.any(np.isnan(out)) or np.any(out == -INF):
        raise EvaluationError("expression produced -inf or NaN")
    return float(out[0]) if single else out


def walk(expr: Expr):
    """Pre-order traversal."""
    yield expr
    for c in expr.children():
        yield from walk(c)


def shift_family(child: Expr, offsets) -> Sup:
    """``sup_k child(x + t_k)`` over a finite list of offsets."""
    return Sup(tuple(Shift(np.atleast_1d(t), child) for t in offsets))


__all__ = [
    "Expr", "Atom", "Norm", "PowerNorm", "Gauge", "Poly1D", "Abs1D", "Linear1D", "QuadDip",
    "Piecewise1D", "Table1D", "Scale", "AddConstant", "ComposeMonotone", "Sup", "MaxFinite",
    "Min", "Sum", "AffinePre", "Shift", "Restrict", "Separable", "InfConv", "ValueFn",
    "MarginalMin", "SupValue", "InnerSearch", "AffineGraph", "AffinePreimage", "SumSplit",
    "ProductSlice", "MapDescriptor", "evaluate", "walk", "shift_family", "Box",
]

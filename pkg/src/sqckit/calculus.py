"""Sigma propagation through combinators.

The ``rule_*`` functions are the closed-form parameter formulas and do no
estimation. ``certify_expr`` walks an expression bottom-up, tracks a region
that contains every input each node can see, and records one
``RuleApplication`` per node so that ``replay`` can recompute the result
bit-for-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from .certify import Triple, ViolationWitness, estimate_sigma, oracle_sigma_1d
from .errors import (
    CoincidentEndpoints,
    ConstantsRefuted,
    DegenerateSamples,
    EmptyFamily,
    EmptyImageOnDomain,
    GammaViolatedOnSamples,
    NegativeConstant,
    NoCalculusRule,
    NonpositiveGamma,
    NonpositiveScalar,
    ZeroOperator,
)
from .geometry import Box, ConvexDomain, Interval, ProductSpace, Segment, SpaceSpec, pnorm
from .spaces import gauge_sqc_check, inner_product_norm_param, norm_sqc_param, power_norm_param

KIND_ORDER = {"declared": 0, "derived": 1, "estimated": 2, "refuted": 3}
GAMMA_INFLATION = 1.01
SPOT_TOL = 1e-9


def _sig(sigma):
    if not sigma >= 0:
        raise NegativeConstant(f"sigma must be nonnegative, got {sigma}")
    return float(sigma)


# ---------------------------------------------------------------- rules


def rule_scale(sigma: float, c: float) -> float:
    if not c > 0:
        raise NonpositiveScalar(f"scale factor must be positive, got {c}")
    return float(c) * _sig(sigma)


def rule_compose(sigma_phi: float, ell: float) -> float:
    if not ell >= 0:
        raise NegativeConstant(f"lower-Lipschitz constant must be >= 0, got {ell}")
    return _sig(sigma_phi) * (float(ell) * float(ell))


def rule_sup(sigmas) -> float:
    s = [_sig(v) for v in sigmas]
    if not s:
        raise EmptyFamily("supremum over an empty family")
    return min(s)


def rule_max_finite(sigmas) -> float:
    s = [_sig(v) for v in sigmas]
    if not s:
        raise EmptyFamily("maximum of no functions")
    return min(s)


def rule_marginal(sigma: float, gamma: float) -> float:
    if not gamma > 0:
        raise NonpositiveGamma(f"gamma must be positive, got {gamma}")
    return _sig(sigma) / (float(gamma) * float(gamma))


def rule_affine_preimage(sigma: float, opnorm: float) -> float:
    if not opnorm > 0:
        raise ZeroOperator(f"operator norm must be positive, got {opnorm}")
    return _sig(sigma) / (float(opnorm) * float(opnorm))


def rule_affine_pre(sigma: float, gamma: float) -> float:
    if not gamma > 0:
        raise NonpositiveGamma(f"gamma must be positive, got {gamma}")
    return _sig(sigma) / (float(gamma) * float(gamma))


def rule_infconv(sigma_joint: float) -> float:
    return _sig(sigma_joint)


def rule_restrict(sigma: float, dist: float, unit_speed: bool = False) -> float:
    if not dist > 0:
        raise CoincidentEndpoints("segment endpoints coincide")
    if unit_speed:
        return _sig(sigma)
    return _sig(sigma) * (float(dist) * float(dist))


def rule_marginal_min(sigma_joint: float) -> float:
    return _sig(sigma_joint)


def rule_sup_value(sigma_joint: float) -> float:
    return _sig(sigma_joint)


def _identity(sigma):
    return _sig(sigma)


# rule name -> replay function taking (inputs, constants)
RULES = {
    "Scale": lambda i, c: rule_scale(i[0], c["c"]),
    "ComposeMonotone": lambda i, c: rule_compose(i[0], c["ell"]),
    "SupFamily": lambda i, c: rule_sup(i),
    "MaxFinite": lambda i, c: rule_max_finite(i),
    "Marginal": lambda i, c: rule_marginal(i[0], c["gamma"]),
    "AffinePreimage": lambda i, c: rule_affine_preimage(i[0], c["opnorm"]),
    "AffinePre": lambda i, c: rule_affine_pre(i[0], c["gamma"]),
    "InfConv": lambda i, c: rule_infconv(i[0]),
    "RestrictSegment": lambda i, c: rule_restrict(i[0], c["dist"], bool(c.get("unit_speed", 0))),
    "MarginalMin": lambda i, c: rule_marginal_min(i[0]),
    "SupValue": lambda i, c: rule_sup_value(i[0]),
    # atom-level sources
    "Declared": lambda i, c: _sig(c["sigma"]),
    "Estimated": lambda i, c: _sig(c["sigma"]),
    "InnerProductNorm": lambda i, c: inner_product_norm_param(c["r"]),
    "UniformlyConvexNorm": lambda i, c: norm_sqc_param(c["sigma_A"], c["M"]),
    "PowerNorm": lambda i, c: power_norm_param(i[0], c["a"], c["R"]),
    "GaugeTheorem": lambda i, c: c["sigma_body"] / 2.0,
    "ConvexAtom": lambda i, c: 0.0,
    "AddConstant": lambda i, c: _identity(i[0]),
}


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class RuleApplication:
    rule: str
    inputs: tuple
    constants: dict
    output: float
    kind: str = "derived"
    node: str = ""
    input_steps: tuple = ()

    def to_dict(self) -> dict:
        return {"rule": self.rule, "inputs": list(self.inputs), "constants": dict(self.constants),
                "output": self.output, "kind": self.kind, "node": self.node,
                "input_steps": list(self.input_steps)}

    @classmethod
    def from_dict(cls, d) -> "RuleApplication":
        return cls(d["rule"], tuple(float(v) for v in d["inputs"]), dict(d["constants"]),
                   float(d["output"]), d.get("kind", "derived"), d.get("node", ""),
                   tuple(int(v) for v in d.get("input_steps", ())))


@dataclass
class SigmaCertificate:
    sigma: float
    kind: str
    trace: list = field(default_factory=list)
    tolerance: float = 0.0
    witness: ViolationWitness | None = None

    def __post_init__(self):
        if not self.sigma >= 0:
            raise NegativeConstant("certificate sigma must be nonnegative")
        if self.kind not in KIND_ORDER:
            raise ValueError(f"unknown certificate kind {self.kind!r}")
        if self.kind == "refuted" and self.witness is None:
            raise ValueError("a refuted certificate needs a witness")

    def to_dict(self) -> dict:
        out = {"sigma": self.sigma, "kind": self.kind, "tolerance": self.tolerance,
               "trace": [s.to_dict() for s in self.trace]}
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
        return out

    def refute(self, witness: ViolationWitness) -> "SigmaCertificate":
        return SigmaCertificate(self.sigma, "refuted", list(self.trace), self.tolerance, witness)


def replay(cert: SigmaCertificate | list) -> float:
    """Recompute every trace step from its inputs and constants.

    Raises ``ValueError`` if any step, or the wiring between steps, does
    not reproduce exactly.
    """
    trace = cert.trace if isinstance(cert, SigmaCertificate) else cert
    outs = []
    for k, step in enumerate(trace):
        if step.input_steps:
            wired = tuple(outs[j] for j in step.input_steps)
            if wired != tuple(step.inputs):
                raise ValueError(f"step {k} ({step.rule}) inputs do not match earlier outputs")
        val = RULES[step.rule](list(step.inputs), step.constants)
        if val != step.output:
            raise ValueError(f"step {k} ({step.rule}) replays to {val!r}, recorded {step.output!r}")
        outs.append(val)
    if not outs:
        raise ValueError("empty trace")
    if isinstance(cert, SigmaCertificate) and outs[-1] != cert.sigma:
        raise ValueError("final trace output differs from the certificate sigma")
    return outs[-1]


# ---------------------------------------------------------------- constant estimation


@dataclass
class ConstantEstimates:
    ell_lower: float | None = None
    gamma: float | None = None
    opnorm: float | None = None
    samples: int = 0

    def to_dict(self):
        return {"ell_lower": self.ell_lower, "gamma": self.gamma, "opnorm": self.opnorm,
                "samples": self.samples}


def _unit_vectors(rng, n, p, budget):
    eye = np.eye(n)
    diag = []
    for i in range(n):
        for j in range(i + 1, n):
            diag.extend([eye[i] + eye[j], eye[i] - eye[j]])
    V = np.vstack([eye] + ([np.array(diag)] if diag else []) + [rng.standard_normal((max(budget, 1), n))])
    V = V[:max(budget, n)]
    nrm = pnorm(V, p)
    return V[nrm > 0] / nrm[nrm > 0][:, None]


def estimate_opnorm(A, budget: int = 10_000, seed: int = 0, p_in: float = 2.0,
                    p_out: float | None = None) -> float:
    """``sup |A v|`` over sampled unit vectors (a lower bound on the true norm)."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    p_out = p_in if p_out is None else p_out
    V = _unit_vectors(np.random.default_rng(seed), A.shape[1], p_in, budget)
    return float(np.max(pnorm(V @ A.T, p_out)))


def exact_opnorm(A, p: float) -> float | None:
    """Exact operator norm for diagonal ``A`` and ``p`` in {2, inf}; else ``None``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.shape[0] != A.shape[1] or p not in (2.0, math.inf):
        return None
    if np.any(A - np.diag(np.diag(A)) != 0):
        return None
    return float(np.max(np.abs(np.diag(A))))


def _sample_pairs(domain, budget, rng):
    P = domain.sample_uniform(rng, budget)
    Q = domain.sample_uniform(rng, budget)
    A = domain.anchors()
    ia, ib = np.triu_indices(len(A), 1)
    return np.vstack([A[ia], P]), np.vstack([A[ib], Q])


def estimate_constants(target, domain: ConvexDomain, budget: int = 10_000, seed: int = 0,
                       inner_domain: ConvexDomain | None = None) -> ConstantEstimates:
    """Sample-based constants.

    ``target`` is an expression (gives the lower-Lipschitz ``ell``), a map
    descriptor (gives ``gamma`` and, for affine maps, ``opnorm``) or a
    matrix (gives ``opnorm``).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    space = domain.space
    if isinstance(target, E.Expr):
        X, U = _sample_pairs(domain, budget, rng)
        d = space.norms(X - U)
        keep = d > 0
        if not keep.any():
            raise DegenerateSamples("all sampled pairs coincide")
        fx, fu = target.evaluate(X[keep]), target.evaluate(U[keep])
        with np.errstate(invalid="ignore"):
            r = np.abs(fx - fu) / d[keep]
        r = r[np.isfinite(r)]
        if r.size == 0:
            raise DegenerateSamples("no finite difference quotient")
        return ConstantEstimates(ell_lower=float(np.min(r)), samples=int(keep.sum()))
    if isinstance(target, np.ndarray) or isinstance(target, (list, tuple)):
        return ConstantEstimates(opnorm=estimate_opnorm(target, budget, seed, space.p), samples=budget)
    m = target
    if isinstance(m, E.AffineGraph):
        V = _unit_vectors(rng, m.A.shape[1], space.p, budget)
        img = pnorm(V @ m.A.T, space.p)
        if not np.any(img > 0):
            raise DegenerateSamples("map collapses every sampled direction")
        gamma = float(np.max(1.0 / img[img > 0])) if np.all(img > 0) else math.inf
        return ConstantEstimates(gamma=gamma, opnorm=float(np.max(img)), samples=V.shape[0])
    if isinstance(m, E.AffinePreimage):
        V = _unit_vectors(rng, m.A.shape[1], space.p, budget)
        img = pnorm(V @ m.A.T, space.p)
        return ConstantEstimates(gamma=float(np.max(img)), opnorm=float(np.max(img)), samples=V.shape[0])
    if isinstance(m, E.SumSplit):
        n = m.dim
        T = inner_domain if inner_domain is not None else Box(-np.ones(n), np.ones(n))
        X, U = _sample_pairs(domain, budget, rng)
        X1 = T.sample_uniform(rng, X.shape[0])
        U1 = T.sample_uniform(rng, X.shape[0])
        num = space.norms(X - U)
        den = space.norms(X1 - U1) + space.norms((X - X1) - (U - U1))
        keep = den > 0
        if not keep.any():
            raise DegenerateSamples("all sampled graph pairs coincide")
        return ConstantEstimates(gamma=float(np.max(num[keep] / den[keep])), samples=int(keep.sum()))
    if isinstance(m, E.ProductSlice):
        return ConstantEstimates(gamma=None, samples=0)
    raise TypeError(f"cannot estimate constants for {type(target).__name__}")


def check_gamma(A, gamma: float, p: float, budget: int = 2000, seed: int = 0, tol: float = SPOT_TOL):
    """Spot-check ``|v| <= gamma |A v|`` on sampled unit vectors."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    V = _unit_vectors(np.random.default_rng(seed), A.shape[1], p, budget)
    img = pnorm(V @ A.T, p)
    bad = np.flatnonzero(1.0 > gamma * img + tol)
    if bad.size:
        v = V[bad[0]]
        raise GammaViolatedOnSamples(
            f"|v| = 1 > gamma |A v| = {gamma * img[bad[0]]:.6g} at v = {v.tolist()}")


def check_ell(f: E.Expr, domain, ell: float, budget: int = 2000, seed: int = 0, tol: float = SPOT_TOL):
    rng = np.random.default_rng(seed)
    X, U = _sample_pairs(domain, budget, rng)
    d = domain.space.norms(X - U)
    fx, fu = f.evaluate(X), f.evaluate(U)
    with np.errstate(invalid="ignore"):
        bad = np.flatnonzero((np.abs(fx - fu) < ell * d - tol * (1 + np.abs(fx))) & (d > 0))
    if bad.size:
        k = bad[0]
        raise ConstantsRefuted(f"declared ell = {ell} fails: |f(x) - f(u)| = {abs(fx[k] - fu[k]):.6g} "
                               f"< ell |x - u| = {ell * d[k]:.6g}")


def check_convex(f: E.Expr, domain, budget: int = 2000, seed: int = 0, tol: float = SPOT_TOL):
    rng = np.random.default_rng(seed)
    X, U = _sample_pairs(domain, budget, rng)
    lam = rng.uniform(0.0, 1.0, size=X.shape[0])
    Z = lam[:, None] * X + (1 - lam)[:, None] * U
    fx, fu, fz = f.evaluate(X), f.evaluate(U), f.evaluate(Z)
    rhs = lam * fx + (1 - lam) * fu
    with np.errstate(invalid="ignore"):
        bad = np.flatnonzero(fz > rhs + tol * (1 + np.abs(rhs)))
    if bad.size:
        raise ConstantsRefuted("inner function declared convex fails the convexity inequality on samples")


def check_nondecreasing(f: E.Expr, lo: float, hi: float, n: int = 2049, tol: float = SPOT_TOL):
    t = np.linspace(lo, hi, n)
    v = f.evaluate(t.reshape(-1, 1))
    with np.errstate(invalid="ignore"):
        if np.any(np.diff(v) < -tol * (1 + np.abs(v[:-1]))):
            raise ConstantsRefuted(f"outer function is not nondecreasing on [{lo}, {hi}]")


# ---------------------------------------------------------------- certify_expr


@dataclass
class _Ctx:
    estimate: bool
    budget: int
    seed: int
    trace: list = field(default_factory=list)

    def push(self, rule, inputs, constants, output, kind, node, input_steps=()) -> int:
        if input_steps:
            kind = _worst(kind, "derived")
        self.trace.append(RuleApplication(rule, tuple(float(v) for v in inputs),
                                          {k: _const(v) for k, v in constants.items()},
                                          float(output), kind, node, tuple(input_steps)))
        return len(self.trace) - 1


def _const(v):
    if isinstance(v, bool):
        return int(v)
    return float(v)


def _worst(*kinds):
    return max(kinds, key=lambda k: KIND_ORDER[k])


@dataclass
class _Node:
    sigma: float
    kind: str
    step: int


def certify_expr(f: E.Expr, domain: ConvexDomain, estimate: bool = True, budget: int = 20_000,
                 seed: int = 0) -> SigmaCertificate:
    """Certificate for ``f`` on ``domain`` from the calculus rules.

    Atoms use declared sigmas, closed forms (norms, power norms) or, when
    ``estimate`` is true, sampled estimates (kind ``estimated``). Nodes
    without a rule (pointwise min, sums) raise ``NoCalculusRule``.
    """
    if f.dim != domain.dim:
        from .errors import DimensionMismatch

        raise DimensionMismatch(f"function lives in R^{f.dim}, domain in R^{domain.dim}")
    ctx = _Ctx(estimate, int(budget), int(seed))
    node = _walk(f, domain, ctx)
    kind = _worst(*(s.kind for s in ctx.trace))
    return SigmaCertificate(node.sigma, kind, ctx.trace, 0.0)


def _estimate_atom(f, region, ctx, label):
    if not ctx.estimate:
        if isinstance(f, E.Atom) and f.is_convex:
            s = ctx.push("ConvexAtom", [], {}, 0.0, "derived", label)
            return _Node(0.0, "derived", s)
        raise NoCalculusRule(f"{label}: no declared sigma and estimation is disabled")
    if f.dim == 1:
        lo, hi = region.bounding_box()
        res = oracle_sigma_1d(f, (float(lo[0]), float(hi[0])), 4097)
        sig = res.sigma_hat
        consts = {"sigma": sig, "grid_n": 4097}
    else:
        res = estimate_sigma(f, region, ctx.budget, ctx.seed)
        sig = res.sigma_hat
        consts = {"sigma": sig, "budget": ctx.budget, "seed": ctx.seed}
    s = ctx.push("Estimated", [], consts, sig, "estimated", label)
    return _Node(sig, "estimated", s)


def _norm_sigma(space: SpaceSpec, region, ctx, label):
    M = region.max_norm()
    p = space.p
    if M <= 0:
        raise NoCalculusRule(f"{label}: region collapses to the origin")
    if space.is_inner_product:
        sig = inner_product_norm_param(M)
        s = ctx.push("InnerProductNorm", [], {"r": M}, sig, "derived", label)
        return _Node(sig, "derived", s)
    if 1.0 < p < 2.0:
        # delta(eps) >= (p-1) eps^2 / 8, i.e. Assumption (A) with sigma_A = p - 1
        sig = norm_sqc_param(p - 1.0, M)
        s = ctx.push("UniformlyConvexNorm", [], {"sigma_A": p - 1.0, "M": M}, sig, "derived", label)
        return _Node(sig, "derived", s)
    # p > 2 or p = inf: delta(eps)/eps^2 -> 0, no positive parameter exists
    s = ctx.push("ConvexAtom", [], {}, 0.0, "derived", label)
    return _Node(0.0, "derived", s)


def _region_in_body(body, region) -> bool:
    lo, hi = region.bounding_box()
    pts = [region.anchors()]
    if region.dim <= 6:
        import itertools

        corners = np.array([np.where(np.array(b) == 1, hi, lo)
                            for b in itertools.product((0, 1), repeat=region.dim)])
        pts.append(corners)
    return bool(np.all(body.gauge(np.vstack(pts)) <= 1.0 + 1e-12))


def _walk(f, region, ctx) -> _Node:
    label = f.kind
    if isinstance(f, E.Atom):
        if f.sigma is not None:
            s = ctx.push("Declared", [], {"sigma": f.sigma}, f.sigma, "declared", label)
            return _Node(f.sigma, "declared", s)
        if isinstance(f, E.Norm):
            return _norm_sigma(f.space, region, ctx, label)
        if isinstance(f, E.PowerNorm):
            base = _norm_sigma(f.space, region, ctx, "norm")
            R = region.max_norm()
            sig = power_norm_param(base.sigma, f.a, R)
            s = ctx.push("PowerNorm", [base.sigma], {"a": f.a, "R": R}, sig, base.kind, label, [base.step])
            return _Node(sig, base.kind, s)
        if isinstance(f, E.Gauge) and ctx.estimate and _region_in_body(f.body, region):
            sig_body = _gauge_body_sigma(f.body, ctx)
            if sig_body > 0:
                v = gauge_sqc_check(f.body, sig_body, budget=max(ctx.budget // 64, 200), seed=ctx.seed)
                if v.holds:
                    out = sig_body / 2.0
                    s = ctx.push("GaugeTheorem", [], {"sigma_body": sig_body}, out, "estimated", label)
                    return _Node(out, "estimated", s)
        return _estimate_atom(f, region, ctx, label)

    if isinstance(f, E.Scale):
        c = _walk(f.child, region, ctx)
        sig = rule_scale(c.sigma, f.c)
        s = ctx.push("Scale", [c.sigma], {"c": f.c}, sig, c.kind, label, [c.step])
        return _Node(sig, c.kind, s)

    if isinstance(f, E.AddConstant):
        c = _walk(f.child, region, ctx)
        s = ctx.push("AddConstant", [c.sigma], {"k": f.k}, c.sigma, c.kind, label, [c.step])
        return _Node(c.sigma, c.kind, s)

    if isinstance(f, E.Shift):
        c = _walk(f.child, region.translate(f.offset), ctx)
        sig = rule_affine_pre(c.sigma, 1.0)
        s = ctx.push("AffinePre", [c.sigma], {"gamma": 1.0}, sig, c.kind, label, [c.step])
        return _Node(sig, c.kind, s)

    if isinstance(f, E.AffinePre):
        p = region.space.p
        c = _walk(f.child, region.affine_image(f.A, f.b), ctx)
        if f.gamma is not None:
            check_gamma(f.A, f.gamma, p, seed=ctx.seed)
            gamma, gk = f.gamma, "declared"
        else:
            gamma, gk = _gamma_for(f.A, p, ctx)
        sig = rule_affine_pre(c.sigma, gamma)
        kind = _worst(c.kind, gk, "derived")
        s = ctx.push("AffinePre", [c.sigma], {"gamma": gamma}, sig, kind, label, [c.step])
        return _Node(sig, kind, s)

    if isinstance(f, E.ComposeMonotone):
        return _compose(f, region, ctx)

    if isinstance(f, (E.Sup, E.MaxFinite)):
        cs = [_walk(ch, region, ctx) for ch in f.items]
        sigs = [c.sigma for c in cs]
        rule = "SupFamily" if isinstance(f, E.Sup) else "MaxFinite"
        sig = rule_sup(sigs) if rule == "SupFamily" else rule_max_finite(sigs)
        kind = _worst(*(c.kind for c in cs))
        s = ctx.push(rule, sigs, {}, sig, kind, label, [c.step for c in cs])
        return _Node(sig, kind, s)

    if isinstance(f, E.Restrict):
        child_space = SpaceSpec(f.u.shape[0], f.p)
        seg = Segment(f.u, f.x, child_space)
        c = _walk(f.child, seg, ctx)
        dist = f.length
        sig = rule_restrict(c.sigma, dist, f.unit_speed)
        s = ctx.push("RestrictSegment", [c.sigma], {"dist": dist, "unit_speed": f.unit_speed}, sig,
                     c.kind, label, [c.step])
        return _Node(sig, c.kind, s)

    if isinstance(f, E.InfConv):
        j = _joint_sum_norm(f.joint(), f.search.domain, region, f.joint_sigma, ctx)
        _probe_finite(f, region, ctx)
        sig = rule_infconv(j.sigma)
        s = ctx.push("InfConv", [j.sigma], {"gamma": 1.0}, sig, j.kind, label, [j.step])
        return _Node(sig, j.kind, s)

    if isinstance(f, E.ValueFn):
        return _value_fn(f, region, ctx)

    if isinstance(f, (E.MarginalMin, E.SupValue)):
        m = f.map
        if not isinstance(m, E.ProductSlice):
            raise EmptyImageOnDomain("only product slices have a nonempty image everywhere")
        j = _joint_product(f, region, ctx)
        rule = "MarginalMin" if isinstance(f, E.MarginalMin) else "SupValue"
        sig = rule_marginal_min(j.sigma) if rule == "MarginalMin" else rule_sup_value(j.sigma)
        s = ctx.push(rule, [j.sigma], {"product_p": f.product_p}, sig, j.kind, label, [j.step])
        return _Node(sig, j.kind, s)

    if isinstance(f, E.Separable):
        raise NoCalculusRule("separable sums are certified only as joints of value functions")
    raise NoCalculusRule(f"no calculus rule for {label!r} nodes")


def _gauge_body_sigma(body, ctx) -> float:
    """Largest sigma with delta_body(eps) >= sigma eps^2/4 on a coarse grid."""
    from .spaces import empirical_profile

    grid = np.geomspace(1e-2, 2.0, 12)
    prof = empirical_profile(body, grid, budget=max(ctx.budget // 64, 200), seed=ctx.seed)
    return float(np.min(4.0 * prof.delta_values / prof.eps_grid ** 2))


def _gamma_for(A, p, ctx):
    A = np.atleast_2d(A)
    if A.shape[0] == A.shape[1] and p in (2.0, math.inf) and not np.any(A - np.diag(np.diag(A))):
        d = np.abs(np.diag(A))
        if np.any(d == 0):
            raise NonpositiveGamma("singular diagonal map has no finite gamma")
        return float(1.0 / np.min(d)), "derived"
    V = _unit_vectors(np.random.default_rng(ctx.seed), A.shape[1], p, ctx.budget)
    img = pnorm(V @ A.T, p)
    if np.any(img <= 0):
        raise NonpositiveGamma("map annihilates a sampled direction")
    return float(GAMMA_INFLATION / np.min(img)), "estimated"


def _opnorm_for(A, p, ctx):
    ex = exact_opnorm(A, p)
    if ex is not None:
        return ex, "derived"
    return GAMMA_INFLATION * estimate_opnorm(A, ctx.budget, ctx.seed, p), "estimated"


def _compose(f, region, ctx):
    label = f.kind
    rng_seed = ctx.seed
    if isinstance(f.inner, E.Atom) and f.inner.convex is None and not f.inner.is_convex:
        raise ConstantsRefuted("inner function of a monotone composition must be convex")
    check_convex(f.inner, region, seed=rng_seed)
    P = np.vstack([region.sample_uniform(np.random.default_rng(rng_seed), 4096), region.anchors()])
    vals = f.inner.evaluate(P)
    vals = vals[np.isfinite(vals)]
    if f.outer_interval is not None:
        lo, hi = f.outer_interval
        if vals.size and (vals.min() < lo - SPOT_TOL or vals.max() > hi + SPOT_TOL):
            raise ConstantsRefuted("inner range leaves the declared outer interval")
    else:
        lo, hi = float(vals.min()), float(vals.max())
    check_nondecreasing(f.outer, lo, hi)
    outer_region = Interval(lo, hi) if hi > lo else Interval(lo, lo + 1e-9)
    c = _walk(f.outer, outer_region, ctx)
    if f.ell is not None:
        check_ell(f.inner, region, f.ell, seed=rng_seed)
        ell, ek = f.ell, "declared"
    else:
        ell = estimate_constants(f.inner, region, ctx.budget, ctx.seed).ell_lower
        ek = "estimated"
    sig = rule_compose(c.sigma, ell)
    kind = _worst(c.kind, ek, "derived")
    s = ctx.push("ComposeMonotone", [c.sigma], {"ell": ell}, sig, kind, label, [c.step])
    return _Node(sig, kind, s)


def _box_of(region):
    lo, hi = region.bounding_box()
    return np.asarray(lo, float), np.asarray(hi, float)


def _joint_sum_norm(joint, T, region, declared, ctx):
    """Joint sigma of ``(x1, x2) -> f1(x1) + f2(x2)`` under the sum norm."""
    if declared is not None:
        s = ctx.push("Declared", [], {"sigma": declared}, declared, "declared", "joint")
        return _Node(declared, "declared", s)
    if not ctx.estimate:
        raise NoCalculusRule("joint sigma not declared and estimation is disabled")
    rlo, rhi = _box_of(region)
    tlo, thi = _box_of(T)
    lo = np.concatenate([tlo, rlo - thi])
    hi = np.concatenate([thi, rhi - tlo])
    n = region.dim
    space = ProductSpace((n, n), region.space.p, 1.0)
    box = Box(lo, hi, space)
    est = estimate_sigma(joint, box, ctx.budget, ctx.seed)
    s = ctx.push("Estimated", [], {"sigma": est.sigma_hat, "budget": ctx.budget, "seed": ctx.seed,
                                   "product_p": 1.0}, est.sigma_hat, "estimated", "joint")
    return _Node(est.sigma_hat, "estimated", s)


def _joint_product(f, region, ctx):
    if f.joint_sigma is not None:
        s = ctx.push("Declared", [], {"sigma": f.joint_sigma}, f.joint_sigma, "declared", "joint")
        return _Node(f.joint_sigma, "declared", s)
    if not ctx.estimate:
        raise NoCalculusRule("joint sigma not declared and estimation is disabled")
    m = f.map
    rlo, rhi = _box_of(region)
    tlo, thi = _box_of(m.inner)
    if m.C is not None:
        mid, half = 0.5 * (rlo + rhi), 0.5 * (rhi - rlo)
        c, r = m.C @ mid, np.abs(m.C) @ half
        ylo, yhi = c - r + tlo, c + r + thi
    else:
        ylo, yhi = tlo, thi
    space = ProductSpace((region.dim, m.inner.dim), region.space.p, f.product_p)
    box = Box(np.concatenate([rlo, ylo]), np.concatenate([rhi, yhi]), space)
    est = estimate_sigma(f.joint, box, ctx.budget, ctx.seed)
    s = ctx.push("Estimated", [], {"sigma": est.sigma_hat, "budget": ctx.budget, "seed": ctx.seed,
                                   "product_p": f.product_p}, est.sigma_hat, "estimated", "joint")
    return _Node(est.sigma_hat, "estimated", s)


def _probe_finite(f, region, ctx, count=16):
    """Evaluate on a few region points so unbounded inner searches surface early."""
    P = np.vstack([region.anchors(), region.sample_uniform(np.random.default_rng(ctx.seed), count)])
    f.evaluate(P)


def _value_fn(f, region, ctx):
    m = f.map
    label = f.kind
    p = region.space.p
    if isinstance(m, E.AffineGraph):
        c = _walk(f.child, region.affine_image(m.A, m.b), ctx)
        if m.gamma is not None:
            check_gamma(m.A, m.gamma, p, seed=ctx.seed)
            gamma, gk = m.gamma, "declared"
        else:
            gamma, gk = _gamma_for(m.A, p, ctx)
        sig = rule_marginal(c.sigma, gamma)
        kind = _worst(c.kind, gk, "derived")
        s = ctx.push("Marginal", [c.sigma], {"gamma": gamma}, sig, kind, label, [c.step])
        return _Node(sig, kind, s)
    if isinstance(m, E.AffinePreimage):
        A = m.A
        if A.shape[0] == A.shape[1] and np.linalg.matrix_rank(A) == A.shape[0]:
            Ainv = np.linalg.inv(A)
            child_region = region.affine_image(Ainv, -Ainv @ m.b)
        else:
            pinv = np.linalg.pinv(A)
            base = region.affine_image(pinv, -pinv @ m.b)
            blo, bhi = _box_of(base)
            N = f._null()
            if N.shape[1]:
                tlo, thi = _box_of(f.search.domain)
                mid, half = 0.5 * (tlo + thi), 0.5 * (thi - tlo)
                c0, r0 = N @ mid, np.abs(N) @ half
                blo, bhi = blo + c0 - r0, bhi + c0 + r0
            child_region = Box(blo, bhi, SpaceSpec(A.shape[1], p)) if A.shape[1] > 1 else Interval(blo[0], bhi[0], p)
        c = _walk(f.child, child_region, ctx)
        if m.gamma is not None:
            opn, ok = m.gamma, "declared"
        else:
            opn, ok = _opnorm_for(A, p, ctx)
        sig = rule_affine_preimage(c.sigma, opn)
        kind = _worst(c.kind, ok, "derived")
        s = ctx.push("AffinePreimage", [c.sigma], {"opnorm": opn}, sig, kind, label, [c.step])
        return _Node(sig, kind, s)
    if isinstance(m, E.SumSplit):
        j = _walk_joint_split(f, region, ctx)
        _probe_finite(f, region, ctx)
        sig = rule_infconv(j.sigma)
        s = ctx.push("InfConv", [j.sigma], {"gamma": 1.0}, sig, j.kind, label, [j.step])
        return _Node(sig, j.kind, s)
    raise NoCalculusRule(f"unsupported map {type(m).__name__}")


def _walk_joint_split(f, region, ctx):
    child = f.child
    if isinstance(child, E.Atom) and child.sigma is not None:
        s = ctx.push("Declared", [], {"sigma": child.sigma}, child.sigma, "declared", "joint")
        return _Node(child.sigma, "declared", s)
    return _joint_sum_norm(child, f.search.domain, region, None, ctx)


def refute_with(cert: SigmaCertificate, f: E.Expr, domain: ConvexDomain, triple: Triple):
    """Attach a witness if ``triple`` violates ``cert.sigma``; otherwise return ``cert``."""
    w = ViolationWitness.at(f, domain.space, triple, cert.sigma)
    return cert.refute(w) if w.holds else cert

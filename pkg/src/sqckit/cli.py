"""Command-line interface.

Exit codes: 0 success / no violation, 1 violation or refutation found,
2 usage or evaluation error. JSON reports are byte-stable for a fixed
configuration when ``--no-timestamp`` is given.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__, report
from .calculus import certify_expr
from .certify import DEFAULT_RTOL, Triple, estimate_sigma, falsify, oracle_sigma_1d
from .errors import SqcError
from .geometry import Interval, SpaceSpec, parse_domain, parse_p

EXIT_OK, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2
CERT_BUDGET = 20_000


class UsageError(Exception):
    pass


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()], dtype=np.float64)
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _hint(text: str) -> Triple:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError("--hint expects X:Y:LAMBDA with comma-separated coordinates")
    return Triple(_floats(parts[0]), _floats(parts[1]), float(parts[2]))


def _load_expr(args):
    from .serialize import deserialize, load

    if getattr(args, "fixture", None):
        from .corpus import load_fixture

        fx = load_fixture(args.fixture)
        return fx.expr, fx
    if not args.expr:
        raise UsageError("--expr (or --fixture) is required")
    text = args.expr.strip()
    return (deserialize(text) if text.startswith("{") else load(args.expr)), None


def _domain(args, fx, required=True):
    if getattr(args, "domain", None):
        return parse_domain(args.domain)
    if fx is not None:
        return fx.domain
    if required:
        raise UsageError("--domain is required")
    return None


def _config(args) -> dict:
    # thread count is an execution detail; leaving it out keeps reports identical across it
    skip = {"func", "no_timestamp", "format", "report", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, rep: dict, text: str | None = None) -> None:
    if args.report:
        report.write(rep, args.report)
    if args.format == "json" or text is None:
        sys.stdout.write(report.dumps(rep))
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _certificate_block(f, D, seed):
    try:
        cert = certify_expr(f, D, budget=CERT_BUDGET, seed=seed)
    except SqcError as exc:
        return {"error": type(exc).__name__, "message": str(exc)}
    return cert.to_dict()


# ---------------------------------------------------------------- commands


def cmd_certify(args) -> int:
    f, fx = _load_expr(args)
    D = _domain(args, fx)
    if args.sigma is None:
        raise UsageError("--sigma is required")
    hints = tuple(_hint(h) for h in (args.hint or ()))
    rtol = DEFAULT_RTOL if args.tol is None else args.tol
    r = falsify(f, D, args.sigma, args.budget, args.seed, hints, args.threads, rtol)
    result = {"domain": D.to_spec(), "falsify": r.to_dict(),
              "certificate": _certificate_block(f, D, args.seed)}
    rep = report.build("certify", _config(args), result, not args.no_timestamp, no_violation=not r.found)
    if r.found:
        w = r.witness
        text = (f"VIOLATION at sigma={args.sigma}: x={w.triple.x.tolist()} y={w.triple.y.tolist()} "
                f"lambda={w.triple.lam!r} margin={w.margin!r}")
    else:
        text = f"no violation at sigma={args.sigma} in {r.checked} triples ({report.NON_PROOF})"
    _emit(args, rep, text)
    return EXIT_VIOLATION if r.found else EXIT_OK


def cmd_estimate(args) -> int:
    f, fx = _load_expr(args)
    D = _domain(args, fx)
    if args.oracle:
        if not isinstance(D, Interval):
            raise UsageError("--oracle needs a 1-D interval domain")
        r = oracle_sigma_1d(f, D, args.grid)
        result = {"method": "grid-oracle", **r.to_dict()}
        refuted, sig = r.raw_ratio < 0, r.sigma_hat
    else:
        hints = tuple(_hint(h) for h in (args.hint or ()))
        r = estimate_sigma(f, D, args.budget, args.seed, hints, args.threads)
        result = {"method": "sampled", **r.to_dict()}
        refuted, sig = not r.quasiconvex, r.sigma_hat
    result["domain"] = D.to_spec()
    rep = report.build("estimate", _config(args), result, not args.no_timestamp)
    _emit(args, rep, f"sigma_hat={sig!r}" + (" (not quasiconvex)" if refuted else ""))
    return EXIT_VIOLATION if refuted else EXIT_OK


def _space(args) -> SpaceSpec:
    return SpaceSpec(int(args.dim), parse_p(args.p))


def cmd_modulus(args) -> int:
    from .spaces import DEFAULT_EPS_GRID, check_assumption_A, empirical_profile, exact_profile

    space = _space(args)
    grid = DEFAULT_EPS_GRID if args.eps is None else _floats(args.eps)
    if args.empirical:
        prof = empirical_profile(space, grid, args.budget, args.seed)
    else:
        prof = exact_profile(space, grid)
    result = {"space": space.to_dict(), "source": prof.source,
              "rows": [{"eps": e, "delta": d} for e, d in prof.rows()]}
    code = EXIT_OK
    if args.sigma is not None:
        v = check_assumption_A(prof, args.sigma)
        result["assumption_A"] = v.to_dict()
        code = EXIT_OK if v.holds else EXIT_VIOLATION
    rep = report.build("modulus", _config(args), result, not args.no_timestamp)
    text = None
    if args.format == "csv":
        text = report.to_csv(["eps", "delta", "source"], [(e, d, prof.source) for e, d in prof.rows()])
    elif args.format == "table":
        text = "\n".join(f"{e:12.6g}  {d:14.8g}" for e, d in prof.rows())
    _emit(args, rep, text)
    return code


def cmd_gauge(args) -> int:
    import json

    from .spaces import body_from_dict, gauge_sqc_check

    with open(args.body, encoding="utf-8") as fh:
        body = body_from_dict(json.load(fh))
    if args.sigma is None:
        raise UsageError("--sigma is required")
    grid = None if args.eps is None else _floats(args.eps)
    v = gauge_sqc_check(body, args.sigma, grid, args.budget, args.seed)
    rep = report.build("gauge", _config(args), v.to_dict(), not args.no_timestamp)
    _emit(args, rep, f"{'holds' if v.holds else 'violated'}; certificate sigma {v.certificate_sigma}")
    return EXIT_OK if v.holds else EXIT_VIOLATION


def cmd_prox(args) -> int:
    from .optimize import prox

    f, fx = _load_expr(args)
    v = _floats(args.v)
    D = parse_domain(args.domain) if args.domain else None
    certified = False
    cert = None
    if D is None:
        region = fx.domain if fx is not None else None
        if region is None:
            raise UsageError("--domain is required unless the function is certified on a fixture domain")
        cert = _certificate_block(f, region, args.seed)
        certified = cert.get("sigma", 0.0) > 0 and cert.get("kind") != "refuted"
        if not certified:
            raise UsageError("no positive sigma certificate; pass an explicit --domain")
    tol = 1e-8 if args.tol is None else args.tol
    r = prox(f, v, D, tol=tol, seed=args.seed, certified=certified, starts=args.starts)
    result = r.to_dict()
    if cert is not None:
        result["certificate"] = cert
    rep = report.build("prox", _config(args), result, not args.no_timestamp)
    text = "empty (attainment suspect)" if r.empty else " ".join(str(p.tolist()) for p in r.points)
    _emit(args, rep, text)
    return EXIT_OK


def cmd_growth(args) -> int:
    from .optimize import quadratic_growth_check

    f, fx = _load_expr(args)
    D = _domain(args, fx)
    if args.sigma is None:
        raise UsageError("--sigma is required")
    g = quadratic_growth_check(f, _floats(args.xbar), args.sigma, D, args.samples, args.seed,
                               1e-9 if args.tol is None else args.tol)
    rep = report.build("growth", _config(args), g.to_dict(), not args.no_timestamp)
    text = None
    if args.format == "csv":
        text = report.to_csv(["y", "f_y", "bound"],
                             [(";".join(repr(float(c)) for c in y), fy, b) for y, fy, b in g.violations])
    elif args.format == "table":
        text = f"{'pass' if g.passed else 'FAIL'}: {len(g.violations)} violations in {g.samples} samples"
    _emit(args, rep, text)
    return EXIT_OK if g.passed else EXIT_VIOLATION


def cmd_coercive(args) -> int:
    from .optimize import supercoercivity_profile

    f, _ = _load_expr(args)
    x0 = None if args.x0 is None else _floats(args.x0)
    c = supercoercivity_profile(f, x0, args.order, _floats(args.radii).tolist(), args.samples,
                                args.seed, args.sigma)
    rep = report.build("coercive", _config(args), c.to_dict(), not args.no_timestamp)
    text = None
    if args.format in ("table", "csv"):
        rows = list(zip(c.radii, c.inf_ratio_per_radius))
        text = report.to_csv(["radius", "inf_ratio"], rows) if args.format == "csv" else \
            "\n".join(f"R={r:g}  inf f/|x|^{c.n} = {v:.6g}" for r, v in rows) + f"\nverdict: {c.verdict}"
    _emit(args, rep, text)
    return EXIT_OK


def cmd_corpus(args) -> int:
    from .corpus import corpus_run, load_fixtures

    if args.action == "list":
        fxs = load_fixtures(filter=args.filter)
        rep = report.build("corpus-list", _config(args), [{"id": f.id, "title": f.title} for f in fxs],
                           not args.no_timestamp)
        _emit(args, rep, "\n".join(f"{f.id:20s} {f.title}" for f in fxs))
        return EXIT_OK
    suite = corpus_run(args.filter, args.budget, args.seed, args.threads)
    rep = report.build("corpus", _config(args), suite.to_dict(), not args.no_timestamp)
    _emit(args, rep, suite.table())
    return EXIT_OK if suite.passed else EXIT_VIOLATION


# ---------------------------------------------------------------- parser


def _common(p, expr=True, sigma=True, domain=True):
    if expr:
        p.add_argument("--expr", help="expression JSON file (or inline JSON)")
        p.add_argument("--fixture", help="use the expression (and domain) of a corpus fixture")
    if domain:
        p.add_argument("--domain", help="ball:C:R | box:LO:HI | interval:A:B | segment:A:B, optional @p=P")
    if sigma:
        p.add_argument("--sigma", type=float)
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None, help="tolerance override")
    p.add_argument("--report", help="write the JSON report here (also on exit 1)")
    p.add_argument("--format", choices=("json", "csv", "table"), default="json")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-stable reports")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default $SQCKIT_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sqckit", description="sigma-quasiconvexity toolkit")
    ap.add_argument("--version", action="version", version=f"sqckit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="search for a violation at a given sigma")
    _common(p)
    p.add_argument("--hint", action="append", help="extra triple X:Y:LAMBDA tried first")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("estimate", help="estimate the best sigma")
    _common(p, sigma=False)
    p.add_argument("--hint", action="append")
    p.add_argument("--oracle", action="store_true", help="exhaustive 1-D grid oracle")
    p.add_argument("--grid", type=int, default=8193)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("modulus", help="modulus of convexity profile of an lp norm")
    _common(p, expr=False, domain=False)
    p.add_argument("--p", default="2")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--eps", help="comma-separated eps grid")
    p.add_argument("--empirical", action="store_true")
    p.set_defaults(func=cmd_modulus)

    p = sub.add_parser("gauge", help="check the gauge modulus condition for a convex body")
    _common(p, expr=False, domain=False)
    p.add_argument("--body", required=True, help="body JSON file")
    p.add_argument("--eps", help="comma-separated eps grid")
    p.set_defaults(func=cmd_gauge)

    p = sub.add_parser("prox", help="proximal points of f at v")
    _common(p, sigma=False)
    p.add_argument("--v", required=True)
    p.add_argument("--starts", type=int, default=16)
    p.set_defaults(func=cmd_prox)

    p = sub.add_parser("growth", help="quadratic growth check around a minimizer")
    _common(p)
    p.add_argument("--xbar", required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("coercive", help="supercoercivity profile")
    _common(p, domain=False)
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--radii", default="10,50,100")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--x0")
    p.set_defaults(func=cmd_coercive)

    p = sub.add_parser("corpus", help="run or list the fixture corpus")
    _common(p, expr=False, sigma=False, domain=False)
    p.add_argument("action", nargs="?", choices=("run", "list"), default="run")
    p.add_argument("--filter")
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sqckit: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SqcError as exc:
        print(f"sqckit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"sqckit: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

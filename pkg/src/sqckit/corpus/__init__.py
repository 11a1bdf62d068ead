"""Fixture corpus and the suite runner.

Each fixture is a JSON file holding an expression, a domain spec, a
lower-semicontinuity flag and an ``expected`` block. ``corpus_run`` checks
every expected field with the matching module operation and returns a
report whose JSON form is byte-stable for a fixed configuration.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import errors
from ..calculus import certify_expr, replay
from ..certify import NON_PROOF, Triple, ViolationWitness, estimate_sigma, falsify, oracle_sigma_1d
from ..errors import FixtureParseError, SqcError
from ..geometry import parse_domain
from ..optimize import minimize, prox, quadratic_growth_check, supercoercivity_profile
from ..serialize import dumps, from_dict
from ..spaces import sigma_at_distance

FIXTURE_DIR = Path(__file__).parent / "fixtures"
CERT_BUDGET = 20_000
EXACT_TOL = 1e-12


@dataclass
class Fixture:
    id: str
    title: str
    expr: object
    expr_json: dict
    domain: object
    domain_spec: str
    lsc: bool
    expected: dict
    notes: list

    @classmethod
    def from_json(cls, d: dict, source: str = "<fixture>") -> "Fixture":
        try:
            return cls(str(d["id"]), str(d.get("title", "")), from_dict(d["expr"], "$.expr"), d["expr"],
                       parse_domain(d["domain"]), d["domain"], bool(d["lsc"]), dict(d["expected"]),
                       list(d.get("notes", [])))
        except (KeyError, TypeError, ValueError, SqcError) as exc:
            raise FixtureParseError(f"{source}: {type(exc).__name__}: {exc}") from None


def load_fixtures(directory=FIXTURE_DIR, filter: str | None = None) -> list[Fixture]:
    out = []
    for p in sorted(Path(directory).glob("*.json")):
        try:
            d = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FixtureParseError(f"{p.name}: invalid JSON: {exc.msg}") from None
        fx = Fixture.from_json(d, p.name)
        if filter is None or filter in fx.id:
            out.append(fx)
    return out


def load_fixture(fid: str, directory=FIXTURE_DIR) -> Fixture:
    p = Path(directory) / f"{fid}.json"
    if not p.exists():
        raise FixtureParseError(f"no fixture named {fid!r}")
    return Fixture.from_json(json.loads(p.read_text(encoding="utf-8")), p.name)


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class FixtureResult:
    id: str
    checks: list
    notes: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {"id": self.id, "passed": self.passed, "checks": [c.to_dict() for c in self.checks],
                "notes": self.notes}


@dataclass
class SuiteReport:
    fixtures: list
    config: dict

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.fixtures)

    def to_dict(self):
        return {"config": self.config, "passed": self.passed,
                "fixtures": [f.to_dict() for f in self.fixtures], "disclaimer": NON_PROOF}

    def table(self) -> str:
        w = max([len(f.id) for f in self.fixtures] + [7])
        lines = [f"{'fixture':<{w}}  result  checks"]
        for f in self.fixtures:
            bad = [c.name for c in f.checks if not c.passed]
            status = "PASS" if f.passed else "FAIL"
            tail = f"{len(f.checks)} ok" if not bad else "failed: " + ", ".join(bad)
            lines.append(f"{f.id:<{w}}  {status:<6}  {tail}")
        return "\n".join(lines)


def _near(a, b, tol):
    return bool(abs(a - b) <= tol)


def _same_triple(t: Triple, d: dict) -> bool:
    e = Triple.from_dict(d)
    return bool(np.array_equal(t.x, e.x) and np.array_equal(t.y, e.y) and t.lam == e.lam)


class _Runner:
    def __init__(self, fx: Fixture, budget: int, seed: int, threads):
        self.fx, self.budget, self.seed, self.threads = fx, budget, seed, threads
        self.checks: list[Check] = []
        # sigmas at which falsify ran clean on the fixture domain; the same
        # triples are then clean at every smaller sigma
        self.clean: dict[float, int] = {}
        self.hints = ()
        hint = fx.expected.get("witness_hint")
        if hint is not None:
            self.hints = (Triple.from_dict(hint),)

    def add(self, name, passed, **detail):
        self.checks.append(Check(name, bool(passed), detail))

    def guard(self, name, fn):
        try:
            fn()
        except SqcError as exc:
            self.add(name, False, error=type(exc).__name__, message=str(exc))

    def domain(self, spec):
        return self.fx.domain if spec is None else parse_domain(spec)

    # ---- individual checks

    def roundtrip(self):
        self.add("roundtrip", dumps(self.fx.expr.to_dict()) == dumps(self.fx.expr_json))

    def certificate(self, exp):
        f, D = self.fx.expr, self.fx.domain
        if "error" in exp:
            try:
                certify_expr(f, D, budget=CERT_BUDGET, seed=self.seed)
            except SqcError as exc:
                self.add("certificate", type(exc).__name__ == exp["error"], error=type(exc).__name__)
                return
            self.add("certificate", False, error=None, expected_error=exp["error"])
            return
        cert = certify_expr(f, D, budget=CERT_BUDGET, seed=self.seed)
        ok = cert.kind == exp["kind"]
        if "sigma" in exp:
            ok = ok and _near(cert.sigma, exp["sigma"], exp.get("tol", EXACT_TOL))
        try:
            replayed = replay(cert) == cert.sigma
        except ValueError:
            replayed = False
        self.add("certificate", ok and replayed, sigma=cert.sigma, kind=cert.kind,
                 rules=[s.rule for s in cert.trace], replay=replayed)
        if cert.kind == "derived":
            r = self.falsify(D, cert.sigma)
            self.add("soundness", not r.found, sigma=cert.sigma, checked=r.checked,
                     **({"witness": r.witness.to_dict()} if r.found else {}))

    def oracle(self, exp):
        r = oracle_sigma_1d(self.fx.expr, self.fx.domain, int(exp.get("grid_n", 8193)))
        ok = _near(r.sigma_hat, exp["value"], exp["tol"])
        if "at_least" in exp:
            ok = ok and r.sigma_hat >= exp["at_least"] - exp["tol"]
        self.add("sigma_oracle", ok, sigma_hat=r.sigma_hat, expected=exp["value"])

    def estimate(self, exp):
        r = estimate_sigma(self.fx.expr, self.fx.domain, self.budget, self.seed, self.hints, self.threads)
        if "range" in exp:
            lo, hi = exp["range"]
            ok = lo <= r.sigma_hat <= hi
        else:
            ok = _near(r.sigma_hat, exp["value"], exp["tol"])
        self.add("sigma_estimate", ok, sigma_hat=r.sigma_hat, samples=r.samples_used)

    def falsify(self, D, sigma):
        if D is self.fx.domain and any(s >= sigma for s in self.clean):
            return None
        r = falsify(self.fx.expr, D, sigma, self.budget, self.seed, self.hints, self.threads)
        if D is self.fx.domain and not r.found:
            self.clean[sigma] = r.checked
        return r

    def quasiconvex(self, flag, wexp):
        f, D = self.fx.expr, self.fx.domain
        if flag and self.clean:
            self.add("quasiconvex", True, implied_by_sigma=min(self.clean))
            return
        r = falsify(f, D, 0.0, self.budget, self.seed, self.hints, self.threads)
        if flag:
            self.add("quasiconvex", not r.found, checked=r.checked)
            return
        ok = r.found
        detail = {"checked": r.checked}
        if r.found:
            w = r.witness
            detail["witness"] = w.to_dict()
            if wexp is not None:
                ok = _same_triple(w.triple, wexp)
                if "margin" in wexp:
                    ok = ok and _near(w.margin, wexp["margin"], EXACT_TOL)
                if "defect" in wexp:
                    ok = ok and _near(w.defect, wexp["defect"], EXACT_TOL)
        self.add("not_quasiconvex", ok, **detail)

    def holds(self, items):
        for it in items:
            D = self.domain(it.get("domain"))
            r = self.falsify(D, it["sigma"])
            if r is None:
                s = min(t for t in self.clean if t >= it["sigma"])
                self.add(f"holds@{it['sigma']!r}", True, domain=D.to_spec(), implied_by_sigma=s)
                continue
            self.add(f"holds@{it['sigma']!r}", not r.found, domain=D.to_spec(), checked=r.checked)

    def refute(self, items):
        for it in items:
            D = self.domain(it.get("domain"))
            r = falsify(self.fx.expr, D, it["sigma"], self.budget, self.seed, self.hints, self.threads)
            ok = r.found
            detail = {"domain": D.to_spec()}
            if r.found:
                detail["witness"] = r.witness.to_dict()
                ok = ok and r.witness.reverify(self.fx.expr, D.space)
                wexp = it.get("witness")
                if wexp is not None:
                    ok = ok and _same_triple(r.witness.triple, wexp)
                    if "margin" in wexp:
                        ok = ok and _near(r.witness.margin, wexp["margin"], EXACT_TOL)
            self.add(f"refute@{it['sigma']!r}", ok, **detail)

    def minimum(self, exp):
        D = self.domain(exp.get("domain"))
        r = minimize(self.fx.expr, D, seed=self.seed)
        if exp.get("attainment_suspect"):
            self.add("min", r.attainment_suspect, value=r.value, attainment_suspect=r.attainment_suspect)
            return
        ok = (not r.attainment_suspect and _near(r.value, exp["value"], exp["tol"])
              and float(np.max(np.abs(r.argmin - np.asarray(exp["point"])))) <= exp["tol"])
        if "clusters" in exp:
            ok = ok and len(r.distinct_local_minima) == exp["clusters"]
        self.add("min", ok, argmin=r.argmin.tolist(), value=r.value, clusters=len(r.distinct_local_minima))

    def prox(self, items):
        for it in items:
            r = prox(self.fx.expr, it["v"], tol=1e-8, seed=self.seed, certified=True)
            if it.get("empty"):
                ok = r.empty and r.attainment_suspect
            else:
                exp = [np.asarray(p) for p in it["points"]]
                ok = (not r.empty and len(r.points) == len(exp)
                      and all(float(np.max(np.abs(p - e))) <= it["tol"] for p, e in zip(r.points, exp)))
                if "value" in it:
                    ok = ok and _near(r.value, it["value"], it["tol"])
            self.add(f"prox@{it['v']!r}", ok, points=[p.tolist() for p in r.points], empty=r.empty)

    def growth(self, items):
        for it in items:
            g = quadratic_growth_check(self.fx.expr, it["xbar"], it["sigma"], self.fx.domain,
                                       10_000, self.seed)
            self.add(f"growth@{it['sigma']!r}", g.passed == it["passes"], violations=len(g.violations),
                     weak_violations=g.weak_violations)

    def coercive(self, exp):
        c = supercoercivity_profile(self.fx.expr, n=exp["order"], radii=exp["radii"], seed=self.seed)
        ok = c.verdict == exp["verdict"]
        if "inf_range" in exp:
            lo, hi = exp["inf_range"]
            ok = ok and all(lo <= v <= hi for v in c.inf_ratio_per_radius[1:])
        self.add("coercive", ok, verdict=c.verdict, infima=c.inf_ratio_per_radius)

    def scaling(self, exp):
        space = self.fx.domain.space
        a, b = (sigma_at_distance(space, e, seed=self.seed) for e in exp["eps"])
        ratio = a.sigma_hat / b.sigma_hat if b.sigma_hat > 0 else math.inf
        lo, hi = exp["ratio_range"]
        self.add("scaling", lo <= ratio <= hi, ratio=ratio, sigma=[a.sigma_hat, b.sigma_hat])

    def run(self) -> FixtureResult:
        e = self.fx.expected
        self.roundtrip()
        steps = [
            ("certificate", lambda: self.certificate(e["certificate"])),
            ("sigma_oracle", lambda: self.oracle(e["sigma_oracle"])),
            ("sigma_estimate", lambda: self.estimate(e["sigma_estimate"])),
            ("holds", lambda: self.holds(e["holds"])),
            ("quasiconvex", lambda: self.quasiconvex(e["quasiconvex"], e.get("witness"))),
            ("refute", lambda: self.refute(e["refute"])),
            ("min", lambda: self.minimum(e["min"])),
            ("prox", lambda: self.prox(e["prox"])),
            ("growth", lambda: self.growth(e["growth"])),
            ("coercive", lambda: self.coercive(e["coercive"])),
            ("scaling", lambda: self.scaling(e["scaling"])),
        ]
        for key, fn in steps:
            if key in e:
                self.guard(key, fn)
        return FixtureResult(self.fx.id, self.checks, self.fx.notes)


def run_fixture(fx: Fixture, budget: int = 100_000, seed: int = 0, threads: int | None = None) -> FixtureResult:
    return _Runner(fx, int(budget), int(seed), threads).run()


def corpus_run(filter: str | None = None, budget: int = 100_000, seed: int = 0,
               threads: int | None = None, directory=FIXTURE_DIR) -> SuiteReport:
    """Run every fixture (optionally those whose id contains ``filter``)."""
    fixtures = load_fixtures(directory, filter)
    results = [run_fixture(fx, budget, seed, threads) for fx in fixtures]
    return SuiteReport(results, {"filter": filter, "budget": int(budget), "seed": int(seed)})


__all__ = ["Fixture", "FixtureResult", "SuiteReport", "Check", "corpus_run", "run_fixture",
           "load_fixtures", "load_fixture", "FIXTURE_DIR", "errors"]

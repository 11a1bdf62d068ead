"""Sigma-quasiconvexity toolkit.

Expression trees with a calculus of sigma parameters, a seeded
counterexample search, a 1-D grid oracle, moduli of convexity for norms
and gauges, and minimization / prox tools.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .calculus import SigmaCertificate, certify_expr, replay
from .certify import estimate_sigma, falsify, oracle_sigma_1d
from .errors import SqcError
from .geometry import Ball, Box, Interval, Segment, SpaceSpec, parse_domain
from .kernels import BACKEND
from .optimize import minimize, prox, quadratic_growth_check, supercoercivity_profile
from .serialize import deserialize, load, serialize

__all__ = [
    "BACKEND", "Ball", "Box", "Interval", "Segment", "SigmaCertificate", "SpaceSpec", "SqcError",
    "certify_expr", "deserialize", "estimate_sigma", "falsify", "load", "minimize", "oracle_sigma_1d",
    "parse_domain", "prox", "quadratic_growth_check", "replay", "serialize", "supercoercivity_profile",
    "__version__",
]

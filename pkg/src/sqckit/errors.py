"""Exception hierarchy.

Every error raised on purpose by the package derives from ``SqcError`` so
the CLI can map it to exit code 2.
"""
from __future__ import annotations


class SqcError(Exception):
    pass


# expressions and parsing

class DimensionMismatch(SqcError, ValueError):
    pass


class EvaluationError(SqcError):
    """An expression produced -inf or NaN."""


class InnerSearchBudgetExceeded(SqcError):
    pass


class UnboundedBelowDetected(SqcError):
    pass


class EmptyImageOnDomain(SqcError):
    pass


class ParseError(SqcError):
    def __init__(self, message: str, location: str = "$"):
        super().__init__(f"{location}: {message}")
        self.location = location


class UnknownAtom(ParseError):
    pass


class InvalidConstant(SqcError, ValueError):
    pass


class EmptyFamily(InvalidConstant):
    pass


class NonpositiveScalar(InvalidConstant):
    pass


class NegativeConstant(InvalidConstant):
    pass


class NonpositiveGamma(InvalidConstant):
    pass


class ZeroOperator(InvalidConstant):
    pass


class CoincidentEndpoints(InvalidConstant):
    pass


class ExponentOutOfRange(InvalidConstant):
    pass


# calculus

class ConstantsRefuted(SqcError):
    """A declared constant (ell, gamma) is contradicted by a sample."""


class GammaViolatedOnSamples(ConstantsRefuted):
    pass


class NoCalculusRule(SqcError):
    """The expression contains a node no sigma-preserving rule covers."""


class NormMismatch(SqcError):
    pass


class DegenerateSamples(SqcError):
    pass


# spaces

class EpsOutOfRange(SqcError, ValueError):
    pass


class AssumptionAViolated(SqcError):
    pass


class NoAdmissiblePairFound(SqcError):
    pass


class NotInnerProduct(SqcError):
    pass


class OriginNotInterior(InvalidConstant):
    pass


# certify

class MidpointOutsideDomain(SqcError):
    pass


class AllSamplesDegenerate(SqcError):
    pass


class GridTooCoarse(SqcError):
    pass


# optimize

class NoFiniteValueFound(SqcError):
    pass


class EmptyShell(SqcError):
    pass


# corpus / cli

class FixtureParseError(SqcError):
    pass


class SpecSyntax(SqcError, ValueError):
    pass


class NonpositiveRadius(SpecSyntax):
    pass


class LoAboveHi(SpecSyntax):
    pass

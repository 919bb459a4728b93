"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class SetValuedError(Exception):
    """Base class for all errors raised by :mod:`setvalued`."""


# geometry
class NotOnGraph(SetValuedError, ValueError):
    pass


class DegenerateGradient(SetValuedError, ValueError):
    pass


class OutsideTube(SetValuedError, ValueError):
    pass


class NoConvergence(SetValuedError, RuntimeError):
    pass


class EmptySet(SetValuedError, ValueError):
    pass


class NoBoundaryFound(SetValuedError, RuntimeError):
    pass


class TooCloseToTerminal(SetValuedError, ValueError):
    pass


# reference sets
class RadiusNonpositive(SetValuedError, ValueError):
    pass


class EmptyInterval(SetValuedError, ValueError):
    pass


# flows
class LeftTube(SetValuedError, RuntimeError):
    pass


class CompetitorOffBoundary(SetValuedError, ValueError):
    pass


class OracleDerivativeFailure(SetValuedError, RuntimeError):
    pass


class StepTooLarge(SetValuedError, RuntimeError):
    pass


# hamiltonian
class NonTangentialZeta(SetValuedError, ValueError):
    pass


class IndefiniteQuadratic(SetValuedError, ArithmeticError):
    pass


class EmptyControlGrid(SetValuedError, ValueError):
    pass


class DegenerateYGradient(SetValuedError, ValueError):
    pass


# verification / scalar solver
class CFLViolation(SetValuedError, ValueError):
    pass


class GridTooCoarse(SetValuedError, ValueError):
    pass


# mean-variance
class ScalarizationBlowup(SetValuedError, ArithmeticError):
    pass


# cli
class ConfigError(SetValuedError, ValueError):
    pass

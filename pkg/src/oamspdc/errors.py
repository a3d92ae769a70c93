"""Exception types raised across the package."""

from __future__ import annotations


class OamSpdcError(Exception):
    """Base class for all package errors."""


class QuadratureNotConverged(OamSpdcError):
    pass


class ClosedFormMismatch(OamSpdcError):
    """Closed-form amplitude disagrees with the quadrature path."""


class UnreachableTarget(OamSpdcError):
    pass


class DegenerateCoupling(OamSpdcError):
    pass


class MissingTerm(OamSpdcError):
    pass


class ZeroSubspaceWeight(OamSpdcError):
    pass


class DimensionMismatch(OamSpdcError):
    pass


class FitDiverged(OamSpdcError):
    pass


class ZeroBlock(OamSpdcError):
    pass


class RankDeficient(OamSpdcError):
    pass


class NonConvergence(OamSpdcError):
    def __init__(self, message: str, grad_norm: float = float("nan")):
        super().__init__(message)
        self.grad_norm = grad_norm


class ConfigError(OamSpdcError):
    pass


class SchemaError(OamSpdcError):
    pass


class WindowLeakWarning(UserWarning):
    """More than the allowed fraction of weight sits on the window boundary."""


class ApproximateSchmidtWarning(UserWarning):
    pass


class RankDeficientWarning(UserWarning):
    pass

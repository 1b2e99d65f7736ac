"""Exception hierarchy for survival-boost."""
from __future__ import annotations


class SurvivalBoostError(Exception):
    """Base class for every error raised by the package."""


class ParseError(SurvivalBoostError, ValueError):
    """Raised when parsing input data fails."""


class ValidationError(ParseError):
    """Raised when well-formed input violates a data invariant."""


class ConfigurationError(SurvivalBoostError, ValueError):
    """Raised for invalid settings."""


class DomainError(SurvivalBoostError, ValueError):
    """Raised when an operation's precondition does not hold."""


class DataMismatchError(DomainError):
    """Raised when input columns do not match a fitted model."""


class ModelDegenerateError(DomainError):
    """Raised when a boosted ensemble has no positive stage weight."""

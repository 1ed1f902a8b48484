"""Exception types raised across the package."""

from __future__ import annotations


class DegenerateInputError(ValueError):
    """Data that cannot support the requested estimate (constant column, too few rows)."""


class BlockConditioningError(ValueError):
    """A clique or separator covariance block is singular or not positive definite."""

    def __init__(self, message: str, kind: str = "", index: int = -1):
        super().__init__(message)
        self.kind = kind
        self.index = index


class ForestFormatError(ValueError):
    """Malformed network document; ``location`` points at the offending element."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class ConfigError(ValueError):
    pass


class DomainError(ValueError):
    pass


class IngestionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """EM did not reach the tolerance; ``state`` holds the last iterate."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state

"""Custom exceptions for the link-level simulation."""

import math
from typing import Optional


class LinkSimError(Exception):
    """Base exception for link simulation errors."""

    def __init__(self, message: str, details: Optional[dict] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class InvalidArgumentError(LinkSimError):
    """Raised when an operation receives arguments outside its preconditions."""
    pass


class InfeasibleSpecError(LinkSimError):
    """Raised when a mix specification cannot be realised."""
    pass


class IllConditionedChannelError(LinkSimError):
    """Raised when a channel matrix is rank deficient for zero forcing."""
    pass


class DegenerateInputError(LinkSimError):
    """Raised when a metric has no power to normalise by."""
    pass


class UnboundedPredictionError(LinkSimError):
    """Raised when a zero EVM would predict an infinite SINR."""

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, details)
        self.sinr_db = math.inf


class ConfigError(LinkSimError):
    """Raised when a run configuration is invalid."""

    def __init__(self, message: str, key: Optional[str] = None, details: Optional[dict] = None):
        super().__init__(message, details)
        self.key = key


class StudyError(LinkSimError):
    """Raised when a study cannot be completed."""
    pass


class OutputError(LinkSimError):
    """Raised when result files cannot be written."""
    pass

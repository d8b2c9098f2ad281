"""Exception types raised across the package."""

import numpy as np


class InvalidGeometryError(ValueError):
    """Empty or malformed position sets."""


class EnsembleFormatError(ValueError):
    """Base class for problems found while reading an ensemble file."""


class ParseError(EnsembleFormatError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RaggedEnsembleError(EnsembleFormatError):
    def __init__(self, message, member_id=None):
        self.member_id = member_id
        super().__init__(message)


class DuplicatePositionError(EnsembleFormatError):
    pass


class InsufficientMembersError(ValueError):
    """Raised when a sample variance is requested from a single member."""


class IllConditionedGramError(np.linalg.LinAlgError):
    def __init__(self, message, condition=None, member_id=None):
        self.condition = condition
        self.member_id = member_id
        super().__init__(message)


class DegenerateInnovationError(np.linalg.LinAlgError):
    """Innovation covariance is singular even after jitter."""


class UnderdeterminedError(np.linalg.LinAlgError):
    """Stacked measurement matrix does not have full column rank."""

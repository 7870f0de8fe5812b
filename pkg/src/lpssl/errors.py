"""Exception hierarchy for lpssl.

Every error is a ``ValueError`` so callers written against plain ``ValueError``
keep working. ``exit_code`` is what the CLI returns when the error escapes.
"""

from typing import Any


class LPSSLError(ValueError):
    """Base class for all lpssl errors."""

    exit_code: int = 1


# --- configuration (exit 2) ---
class ConfigError(LPSSLError):
    exit_code = 2


class AlphaOutOfRange(ConfigError):
    pass


class KTooLarge(ConfigError):
    pass


class StageOrderError(ConfigError):
    """Raised when a stage is started without the artifacts of the stage it depends on."""


# --- data (exit 3) ---
class DataError(LPSSLError):
    exit_code = 3


class EmptyCorpus(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class EmptySplit(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class FileUnreadable(DataError):
    pass


class EmptyFile(DataError):
    pass


class NoLabeledPoints(DataError):
    pass


class SingleClassEval(DataError):
    pass


class FormatError(DataError):
    """Binary artifact has the wrong magic, version or shape."""


# --- numerical (exit 4) ---
class NumericalError(LPSSLError):
    exit_code = 4


class NotConverged(NumericalError):
    """The diffusion solve hit ``max_iter``; ``partial`` holds the best solution found."""

    def __init__(self, message: str, partial: Any, residual: float):
        super().__init__(message)
        self.partial = partial
        self.residual = residual


class DivergedLoss(NumericalError):
    pass


__all__ = [
    "LPSSLError",
    "ConfigError",
    "AlphaOutOfRange",
    "KTooLarge",
    "StageOrderError",
    "DataError",
    "EmptyCorpus",
    "LabelOutOfRange",
    "EmptySplit",
    "DimensionMismatch",
    "FileUnreadable",
    "EmptyFile",
    "NoLabeledPoints",
    "SingleClassEval",
    "FormatError",
    "NumericalError",
    "NotConverged",
    "DivergedLoss",
]

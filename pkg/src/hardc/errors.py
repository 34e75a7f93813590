"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``DataError`` subclasses exit 2,
``NumericError`` exits 3, ``ConfigError`` and usage mistakes exit 1.
"""

from __future__ import annotations


class HardcError(Exception):
    """Base class for every error raised deliberately by this package."""


class DataError(HardcError):
    """Input data is malformed or unsuitable for the requested operation."""


class ParseError(DataError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class InsufficientClass(DataError):
    pass


class MissingClass(DataError):
    pass


class EmptyDataset(DataError):
    pass


class ConstantSignal(DataError):
    pass


class SignalTooShort(DataError):
    pass


class InvalidBand(DataError):
    pass


class UnstableDesign(DataError):
    pass


class LengthMismatch(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class PipelineError(DataError):
    """A preprocessing stage failed; ``stage`` names which one."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


class ShapeMismatch(HardcError, ValueError):
    pass


class SpecError(HardcError, ValueError):
    pass


class NumericError(HardcError, ArithmeticError):
    """A tensor op produced NaN or Inf."""


class GraphStale(HardcError, RuntimeError):
    """``backward`` was called on a graph that has already been consumed."""


class ConfigError(HardcError):
    def __init__(self, line: int | None, reason: str):
        self.line = line
        self.reason = reason
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{reason}")

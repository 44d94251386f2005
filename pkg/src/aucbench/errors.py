"""Exception hierarchy shared across the package."""


class AucBenchError(Exception):
    """Base class for all errors raised by aucbench."""


class EmptyClass(AucBenchError, ValueError):
    """A positive or negative class is missing where both are required."""


class NonFiniteScore(AucBenchError, ValueError):
    pass


class ShapeMismatch(AucBenchError, ValueError):
    pass


class EmptyStage(AucBenchError, RuntimeError):
    """``end_stage`` was called before any iterate was accumulated."""


class BadArchitecture(AucBenchError, ValueError):
    pass


class DegenerateBatch(AucBenchError, FloatingPointError):
    """Score normalization hit an (almost) all-zero batch of raw scores."""


class CacheMismatch(AucBenchError, ValueError):
    pass


class DataError(AucBenchError):
    """Base class for dataset construction and ingestion failures."""


class DataIOError(DataError, OSError):
    pass


class ParseError(DataError, ValueError):
    def __init__(self, row, column, message=""):
        self.row = row
        self.column = column
        detail = f": {message}" if message else ""
        super().__init__(f"bad cell at line {row}, column {column!r}{detail}")


class SingleClass(DataError, ValueError):
    pass


class TargetTooHigh(DataError, ValueError):
    pass


class BadParams(DataError, ValueError):
    pass


class TooFewSamples(DataError, ValueError):
    pass


class ConfigError(AucBenchError, ValueError):
    pass


class DivergedLoss(AucBenchError, FloatingPointError):
    """Training produced a non-finite loss or non-finite parameters."""

    def __init__(self, epoch, iteration, message="training diverged"):
        self.epoch = epoch
        self.iteration = iteration
        super().__init__(f"{message} (epoch {epoch}, iteration {iteration})")


class EmptyResults(AucBenchError, ValueError):
    pass

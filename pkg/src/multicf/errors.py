"""Exception hierarchy shared across the engine.

The CLI maps these onto exit codes: data/format problems exit 2,
numerical failures exit 3.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class DataError(EngineError):
    """Bad input data or file contents."""


class ParseError(DataError):
    """A file line could not be parsed; carries path and 1-based line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class RangeError(DataError):
    """A value lies outside its declared bounds."""


class ConfigError(DataError):
    """Invalid configuration values."""


class TaxonomyError(DataError):
    """Structurally invalid item hierarchy."""


class DanglingReferenceError(TaxonomyError):
    """A taxonomy line references an undeclared parent."""


class UnknownIdError(DataError):
    """Lookup of an id that is not present."""


class AlignmentError(DataError):
    """Prediction/truth files do not share the same key set."""


class ShapeError(DataError):
    """Mismatched array dimensions."""


class MetricError(DataError):
    """A metric is undefined for the given input (e.g. empty)."""


class NumericError(EngineError):
    """Base class for numerical failures."""


class DivergenceError(NumericError):
    """Training produced non-finite parameters; carries the epoch index."""

    def __init__(self, epoch, message=None):
        super().__init__(message or f"non-finite parameters after epoch {epoch}")
        self.epoch = epoch


class SingularSystemError(NumericError):
    """A linear system was singular; advise regularization > 0."""


class PipelineError(EngineError):
    """A multi-stage pipeline could not run as requested."""

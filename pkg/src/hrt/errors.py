"""Exception hierarchy.

``DataError`` subclasses describe bad inputs (malformed files, shape
problems); ``FitError`` subclasses describe numerical failures while fitting
or scoring. The CLI maps the two families to distinct exit codes.
"""


class HrtError(Exception):
    """Base class for all package errors."""


class DataError(HrtError):
    pass


class FitError(HrtError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class LengthMismatch(DataError, ValueError):
    pass


class EmptyTrainingSet(DataError, ValueError):
    pass


class TooFewRows(DataError, ValueError):
    pass


class InvalidLabels(DataError, ValueError):
    """Classification targets outside {0, 1}."""


class ParseError(DataError):
    def __init__(self, row, col, message):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col}: {message}")


class MissingTarget(DataError):
    pass


class RaggedRows(DataError):
    pass


class FormatError(DataError):
    """Model payload has an unknown version tag or header."""


class CorruptPayload(DataError):
    """Model payload header is valid but the body does not parse."""


class NotPositiveDefinite(FitError):
    pass


class SingularSystem(FitError):
    pass


class TooFewSamples(FitError):
    pass


class EmptyPartitionSide(FitError):
    pass


class DegenerateBlock(FitError):
    pass


class NoDescent(FitError):
    pass


class Unsplittable(FitError):
    pass


class ZeroVariance(FitError):
    pass


class SingleClass(FitError):
    pass

"""Typed failure taxonomy shared by every module.

The CLI maps these onto its stable exit-code contract: usage/validation
problems exit 2, data-content problems exit 3, OS-level I/O exits 4.
"""


class DensegapError(Exception):
    """Base class for all toolkit failures; `exit_code` drives the CLI."""

    exit_code = 3


class ValidationError(DensegapError):
    """Caller-supplied parameters are inconsistent with the data at hand."""

    exit_code = 2


class DataError(DensegapError):
    """File or matrix content violates a format or statistical precondition."""

    exit_code = 3


class IoFailure(DensegapError):
    """OS-level read or write failure."""

    exit_code = 4


# --- file loading -----------------------------------------------------------

class MissingFile(IoFailure):
    pass


class HeaderMismatch(DataError):
    pass


class RaggedRow(DataError):
    """A CSV data row with the wrong field count; `row` is 1-based."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"row {row} has the wrong number of fields")


class NonFiniteValue(DataError):
    """A value that does not parse as a finite real (NaN, Inf, or garbage)."""

    def __init__(self, row, col, message=None):
        self.row = row
        self.col = col
        super().__init__(message or f"non-finite value at row {row}, column {col}")


class BadMagic(DataError):
    pass


class TruncatedPayload(DataError):
    """Binary payload shorter (or longer) than its header promises."""


class LabelIndexOutOfRange(DataError):
    pass


# --- synthesis and selection ------------------------------------------------

class InvalidSpec(ValidationError):
    pass


class NegativeFeatureValue(DataError):
    """Chi-square needs nonnegative observations; shift explicitly instead."""

    def __init__(self, row, col, message=None):
        self.row = row
        self.col = col
        super().__init__(message or f"negative feature value at row {row}, column {col}")


class SingleClass(DataError):
    pass


class KOutOfRange(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


# --- clustering and centroids -----------------------------------------------

class EmptyClass(DataError):
    pass


class TooFewPoints(ValidationError):
    pass


# --- abstention model --------------------------------------------------------

class NonFiniteInput(DataError):
    pass


class SchemaVersionMismatch(DataError):
    pass


class CorruptModel(DataError):
    pass


class EmptyCalibrationSet(ValidationError):
    pass


# --- evaluation ---------------------------------------------------------------

class LengthMismatch(ValidationError):
    pass


class UnknownClass(DataError):
    """An evaluation split contains a class the model was never fitted on."""


class DegenerateCovariance(UserWarning):
    """Covariance rank < 2; the projection falls back to raw coordinates."""

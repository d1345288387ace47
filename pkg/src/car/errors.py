"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1 (argparse),
ValidationError and subclasses exit 2, RemoteServiceError exits 3.
"""


class CarError(Exception):
    """Base class for all package errors."""


class ValidationError(CarError):
    """Bad data or a violated precondition (malformed input, dimension
    mismatch, out-of-range parameter)."""


class FormatError(ValidationError):
    """A binary or delimited artifact has a bad header, wrong magic, or is
    truncated."""


class ManifestError(ValidationError):
    """Chained artifacts disagree about their provenance (content-hash
    mismatch)."""


class VerdictParseError(CarError):
    """A judge reply could not be parsed into a verdict."""


class RemoteServiceError(CarError):
    """A remote embedding or judge endpoint failed after retries."""

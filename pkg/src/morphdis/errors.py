"""Exception types shared across the toolkit.

Everything raised on purpose derives from :class:`MorphdisError`, so callers
(and the CLI) can separate data problems (exit code 2) from genuine bugs
(exit code 3).
"""


class MorphdisError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(MorphdisError):
    """A schema document or a feature bundle violates the schema contract."""


class UnknownFeature(SchemaError):
    """A feature name is not part of the schema in use."""


class ParseError(MorphdisError):
    """A serialized tag string cannot be parsed under the schema."""


class FormatError(MorphdisError):
    """A data file is malformed. Carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class VersionError(FormatError):
    """A data file declares a format version this build does not support."""


class AlignmentError(MorphdisError):
    """Two token streams that must run in parallel do not."""


class NormalizationError(MorphdisError):
    """A probability vector is too far from summing to one to repair."""


class SchemaMismatch(MorphdisError):
    """Inputs built under different schemas (or tagger kinds) were mixed."""


class EmptyCorpus(MorphdisError):
    """The operation needs at least one token of data."""


class EmptyCandidates(MorphdisError):
    """Ranking needs at least one candidate analysis."""


class RemapError(MorphdisError):
    """A harmonized value is not valid in the target schema and no rule covers it."""


class LengthMismatch(MorphdisError):
    """Paired sequences differ in length."""


class InconsistentMetric(MorphdisError):
    """Learning-curve cells mix incompatible metrics."""

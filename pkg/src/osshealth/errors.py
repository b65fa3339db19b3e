"""Exception hierarchy shared across the package."""


class OssHealthError(Exception):
    """Base class for all package errors."""


# --- ingest ---------------------------------------------------------------

class MissingFile(OssHealthError):
    """A required archive entity file is absent."""


class SchemaError(OssHealthError):
    """A row failed field parsing; message carries file and line."""


class InvariantViolation(OssHealthError):
    """A domain-type invariant does not hold."""


class AuthError(OssHealthError):
    """The remote host rejected the credentials (401/403)."""


class RateLimited(OssHealthError):
    def __init__(self, retry_after=None):
        super().__init__(f"rate limited (retry-after: {retry_after})")
        self.retry_after = retry_after


class PartialData(OssHealthError):
    """Pagination aborted mid-fetch; no partial archive is kept."""


# --- tables / datasets ----------------------------------------------------

class ColumnMismatch(OssHealthError):
    """Feature rows do not share one metric-name set."""


class UnlabeledRow(OssHealthError):
    """An operation requiring labels met an unlabeled row."""


class ClassTooSmall(OssHealthError):
    """A class has too few rows for the requested operation."""


class LengthMismatch(OssHealthError):
    pass


class UnknownLabel(OssHealthError):
    pass


class MissingFeatureColumn(OssHealthError):
    """Prediction input lacks a feature the model was trained on."""


# --- numerics / learners --------------------------------------------------

class InvalidThreshold(OssHealthError):
    pass


class EmptyInput(OssHealthError):
    pass


class DimensionMismatch(OssHealthError):
    pass


class InvalidHyperparam(OssHealthError):
    pass


class NonConvergence(OssHealthError):
    """An iterative solver hit its iteration cap before its tolerance."""


class EmptyGrid(OssHealthError):
    pass


class KTooLarge(Warning):
    """k exceeds the smallest class size; some folds may lack a class."""


# --- evaluation / diagnostics ---------------------------------------------

class EmptyMatrix(OssHealthError):
    pass


class ConstantColumn(OssHealthError):
    """A statistic is undefined on a zero-variance column."""


class SampleSizeOutOfRange(OssHealthError):
    pass


class SingularCovariance(OssHealthError):
    pass


class ConfigError(OssHealthError):
    """Run configuration file is malformed or inconsistent."""

"""Exception hierarchy shared across the package.

Everything raised on bad data or bad usage derives from :class:`ActonError`
so callers (and the CLI) can distinguish data problems from programming
errors. :class:`NumericError` is reserved for NaN/Inf detection during
training or inference.
"""


class ActonError(Exception):
    """Base class for all errors raised by this package."""


class NumericError(ActonError):
    """A numeric failure (NaN/Inf) was detected in a computation."""


# --- core ------------------------------------------------------------------

class IndivisibleLength(ActonError):
    """Sequence length is not a multiple of the segment length."""


class DimensionMismatch(ActonError):
    """Vectors or tensors disagree on an expected dimension."""


# --- ingest ----------------------------------------------------------------

class MalformedRow(ActonError):
    """A CSV row could not be parsed; message names the line number."""


class DuplicateTimestamp(ActonError):
    """Two rows claim the same (subject, timestamp) slot."""


class EmptyInput(ActonError):
    """An input that must contain data was empty."""


class UnknownTaskColumn(ActonError):
    """A labels file header names a column that is not a known task."""


class OutOfRangeClass(ActonError):
    """A label value is outside the task's class range."""


class NoSymbolVectors(ActonError):
    """The embedding space has no symbol-level table to average over."""


# --- synthgen --------------------------------------------------------------

class InfeasibleCorrelation(ActonError):
    """Requested label correlations cannot be realized by any copula."""


class InsufficientData(ActonError):
    """Not enough observations to compute the requested statistic."""


# --- act2vec ---------------------------------------------------------------

class AllZeroCounts(ActonError):
    """A noise distribution was requested over all-zero counts."""


class GranularityMismatch(ActonError):
    """A sequence cannot be segmented at the embedding space's granularity."""


class UnknownSegment(ActonError):
    """Features were requested for a subject the space has never seen."""


# --- neuralnet -------------------------------------------------------------

class IdOutOfRange(ActonError):
    """An embedding lookup id falls outside the table."""


class ShapeMismatch(ActonError):
    """Operand shapes are incompatible."""


class WindowTooLarge(ActonError):
    """A pooling window exceeds the feature-map length."""


class BatchTooSmall(ActonError):
    """Batch normalization needs at least two rows in training mode."""


# --- models ----------------------------------------------------------------

class SingleClassTrainingSet(ActonError):
    """Classifier training data contains fewer than two classes."""


class NoLabeledSubjects(ActonError):
    """No subject has a label for any requested task."""


class AlphaSumViolation(ActonError):
    """Task mixture weights do not sum to one."""


# --- eval ------------------------------------------------------------------

class LengthMismatch(ActonError):
    """Predictions and gold labels differ in length."""


class LabelOutOfRange(ActonError):
    """A label value falls outside [0, n_classes)."""


# --- persist ---------------------------------------------------------------

class HeaderMismatch(ActonError):
    """A persisted file's header is malformed or inconsistent."""


class TruncatedFile(ActonError):
    """A persisted file ends before the declared row count."""


class VersionMismatch(ActonError):
    """A checkpoint was written by an incompatible format version."""


class DigestMismatch(ActonError):
    """Stored content digest does not match the file's actual content."""

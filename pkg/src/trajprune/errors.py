"""Exception types shared across the toolkit.

Format problems raised while reading or writing log files all derive from
FormatError so callers can catch the whole family; usage-level mistakes
(bad selector, mismatched tables) derive from ValueError where that is the
natural Python idiom.
"""


class TrajPruneError(Exception):
    """Base class for all toolkit errors."""


class FormatError(TrajPruneError):
    """A trajectory log (or dataset file) violates its format contract."""


class MagicMismatch(FormatError):
    """File does not start with a recognized magic string."""


class TruncatedFile(FormatError):
    """Declared counts exceed the bytes actually present."""


class NonFinite(FormatError):
    """A logit value is NaN or infinite."""


class DuplicateSampleId(FormatError):
    """Two samples in one log share an id."""


class EpochGap(FormatError):
    """Epoch indices are not contiguous 1..T."""


class LabelOutOfRange(FormatError):
    """A label is >= the declared class count."""


class SelectorOutOfRange(TrajPruneError, ValueError):
    """An epoch selector names epochs outside [1, T] or selects none."""


class EpochOutOfRange(SelectorOutOfRange):
    """A single requested epoch lies outside [1, T]."""


class MaxOverEmptySet(TrajPruneError, ValueError):
    """Margin against the best other class needs at least two classes."""


class MetricMismatch(TrajPruneError, ValueError):
    """Score tables being combined do not share metric and selector."""


class SampleSetMismatch(TrajPruneError, ValueError):
    """Score tables being combined do not cover the same sample ids."""


class MissingSoftLabels(TrajPruneError, ValueError):
    """Operation needs a score table that carries soft labels."""


class EmptyTable(TrajPruneError, ValueError):
    """Operation needs a non-empty score table."""


class RateOutOfRange(TrajPruneError, ValueError):
    """Prune rate must lie in [0, 1)."""


class RatioOutOfRange(TrajPruneError, ValueError):
    """Noise ratio must lie in [0, 1)."""


class UnknownSampleId(TrajPruneError, ValueError):
    """A plan references a sample id absent from the manifest."""


class DivergenceDetected(TrajPruneError):
    """Training produced a non-finite loss; the log is incomplete."""

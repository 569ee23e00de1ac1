"""Exception types raised by the toolkit.

Everything derives from :class:`WeaknerError` so callers (notably the CLI)
can distinguish data problems from genuine bugs.
"""


class WeaknerError(Exception):
    """Base class for all toolkit errors."""


class EmptySentence(WeaknerError):
    """Tokenization produced no tokens (empty or all-whitespace input)."""


class OverlappingSpans(WeaknerError):
    """Two entity spans share a token."""


class MalformedLine(WeaknerError):
    """A label file line could not be parsed."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class UnknownTag(WeaknerError):
    """A tag string is not part of the active tag set."""


class FractionOutOfRange(WeaknerError):
    """Seed fraction must lie strictly between 0 and 1."""


class EmptyReferenceSet(WeaknerError):
    """A reference-set file contained no usable names."""


class LabelLengthMismatch(WeaknerError):
    """A labeling does not have one entry per token."""


class EmptyDataset(WeaknerError):
    """An operation that needs data received none."""


class ModelTagSetMismatch(WeaknerError):
    """Model tag set is incompatible with the data or matches given."""


class SpecInvalid(WeaknerError):
    """Synthetic-corpus parameters are out of range."""

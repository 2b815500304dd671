"""Domain exceptions shared across the pipeline.

Everything raised on a domain-level failure derives from AlphaError so the
CLI can map any of them to exit code 1 with a one-line diagnostic.
"""

from __future__ import annotations


class AlphaError(Exception):
    """Base class for all domain errors."""


# --- trace ingestion ---

class MalformedLine(AlphaError):
    """A trace line that cannot be parsed into an instruction."""


class TraceIoError(AlphaError):
    """A trace file that cannot be opened or read."""


class LabelError(AlphaError):
    """A filename that does not match the labeling convention."""


class NoTimestamps(AlphaError):
    """A time-based operation on a sample without any timestamps."""


class EmptySlice(AlphaError):
    """A requested minute window holds no instructions and fallback is off."""


# --- feature engineering / corpus ---

class EmptyStream(AlphaError):
    """Function segmentation over an empty word stream."""


class EmptyCorpus(AlphaError):
    """A corpus operation over zero usable sentences."""


# --- tokenizer ---

class VocabTooSmall(AlphaError):
    """Requested vocabulary cannot even hold specials plus the alphabet."""


class DecodeError(AlphaError):
    """A token id outside the vocabulary."""


# --- classifier ---

class DegenerateTraining(AlphaError):
    """Classifier training data with a single label."""


class EmptyFunction(AlphaError):
    """Classification of an empty sentence or an empty function list."""


class ScorerProtocolError(AlphaError):
    """An external scorer response that violates the wire protocol."""


class ScorerUnavailable(AlphaError):
    """An external scorer that timed out or disappeared."""


# --- SVM ---

class DegenerateFit(AlphaError):
    """SVM fitting with a single class present."""


class DimensionError(AlphaError):
    """A point whose dimension does not match the fitted model."""


class EmptyDistances(AlphaError):
    """Quartile thresholds requested over an empty distance list."""


# --- reporting ---

class MissingLabel(AlphaError):
    """A verdict for a sample with no ground-truth label."""

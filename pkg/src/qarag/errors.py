"""Exception hierarchy for the engine.

Every operational failure raises a subclass of :class:`QaRagError` so callers
can distinguish engine errors from programming errors (``ValueError`` /
``TypeError`` are reserved for violated call preconditions).
"""

from __future__ import annotations


class QaRagError(Exception):
    """Base class for all engine errors."""


# --- corpus -----------------------------------------------------------------


class EmptyDocumentError(QaRagError):
    """A document or text to chunk was empty."""


class InvalidChunkingConfigError(QaRagError):
    """Chunk size / overlap combination is not usable."""


class EncodingError(QaRagError):
    """A source file could not be decoded as UTF-8."""


class EmptyCorpusError(QaRagError):
    """A corpus directory contained no ingestible files."""


# --- vector index -----------------------------------------------------------


class DuplicateChunkError(QaRagError):
    """A chunk key was added to the index twice."""


class DimensionError(QaRagError):
    """A vector's dimension does not match the index."""


class CorruptIndexError(QaRagError):
    """An index file failed structural validation on load."""


class EmptyIndexError(QaRagError):
    """Retrieval was attempted against an index with no entries."""


# --- model gateway ----------------------------------------------------------


class EndpointUnavailableError(QaRagError):
    """All retries against a model endpoint were exhausted."""

    def __init__(self, message: str, last_status: int | None = None):
        super().__init__(message)
        self.last_status = last_status


class ProtocolError(QaRagError):
    """A model endpoint returned a structurally invalid response."""


class RequestRejectedError(QaRagError):
    """A model endpoint rejected the request (4xx); not retried."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


# --- pipeline stages --------------------------------------------------------


class GenerationFailedError(QaRagError):
    """A generation call required by a retrieval track failed.

    ``track`` names the retrieval track that needed the generation
    (``answer``, ``query_variant`` or ``hyde_doc``).
    """

    def __init__(self, message: str, track: str):
        super().__init__(message)
        self.track = track


class ExpansionParseError(QaRagError):
    """Query expansion output could not be parsed after a retry."""


class RerankFailedError(QaRagError):
    """The rerank endpoint failed while scoring a pool."""


class TemplateError(QaRagError):
    """A prompt template is missing required placeholders."""


class AnswerGenerationError(QaRagError):
    """Final answer generation failed; ``contexts`` keeps the selected
    chunks so callers can still display them."""

    def __init__(self, message: str, contexts=None):
        super().__init__(message)
        self.contexts = contexts or []


# --- evaluation -------------------------------------------------------------


class DatasetParseError(QaRagError):
    """A benchmark dataset line is malformed."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class BenchmarkDegradedError(QaRagError):
    """More than half of the benchmark rows failed."""

    def __init__(self, message: str, report=None, records=None):
        super().__init__(message)
        self.report = report
        self.records = records or []

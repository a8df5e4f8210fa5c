"""Deterministic in-process stand-ins for the model endpoints.

Every mock is bit-deterministic given (seed, inputs), so the full test
and acceptance suite runs offline with reproducible outputs.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Sequence

import numpy as np

from .gateway import (
    ChatMessage,
    EmbeddingVector,
    _check_embed_preconditions,
    _check_generate_preconditions,
)


def _last_user_content(messages: Sequence[ChatMessage]) -> str:
    _check_generate_preconditions(messages)
    return messages[-1].content


class MockGenerator:
    """Deterministic chat generator.

    Modes:

    * ``echo``    — returns ``"ECHO:" + last user message content``.
    * ``keyword`` — scans the last user message (case-folded) for configured
      keywords in insertion order and returns the first match's canned reply,
      falling back to ``default_reply``. This simulates a domain-tuned model
      that answers known questions with corpus vocabulary.
    """

    def __init__(
        self,
        mode: str = "echo",
        *,
        replies: dict[str, str] | None = None,
        default_reply: str = "No matching guideline was found.",
    ):
        if mode not in ("echo", "keyword"):
            raise ValueError(f"unknown mock generator mode {mode!r}")
        self.mode = mode
        self.replies = dict(replies or {})
        self.default_reply = default_reply

    def generate(self, messages: Sequence[ChatMessage]) -> str:
        prompt = _last_user_content(messages)
        if self.mode == "echo":
            return "ECHO:" + prompt
        folded = prompt.casefold()
        for keyword, reply in self.replies.items():
            if keyword.casefold() in folded:
                return reply
        return self.default_reply


class FunctionGenerator:
    """Generator backed by an arbitrary function of the messages.

    Test scaffolding for scripted judges and parse-failure scenarios.
    """

    def __init__(self, fn: Callable[[Sequence[ChatMessage]], str]):
        self._fn = fn
        self.calls: list[list[ChatMessage]] = []

    def generate(self, messages: Sequence[ChatMessage]) -> str:
        _check_generate_preconditions(messages)
        self.calls.append(list(messages))
        return self._fn(messages)


class MockEmbedder:
    """Maps each text to a seeded pseudo-random unit vector.

    The per-text seed is a stable 64-bit hash of the text bytes combined
    with the configured global seed, so identical texts always embed to
    identical vectors and runs are reproducible across processes.
    """

    def __init__(self, dimension: int = 64, seed: int = 0, max_batch: int = 64):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self.seed = seed
        self.max_batch = max_batch

    def _text_seed(self, text: str) -> int:
        h = hashlib.blake2b(digest_size=8)
        h.update(self.seed.to_bytes(8, "little", signed=True))
        h.update(text.encode("utf-8"))
        return int.from_bytes(h.digest(), "little")

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_embed_preconditions(texts, self.max_batch)
        vectors = []
        for text in texts:
            rng = np.random.default_rng(self._text_seed(text))
            vectors.append(EmbeddingVector.normalized(rng.standard_normal(self.dimension)))
        return vectors


class MockReranker:
    """Token-overlap relevance scoring.

    score = |query tokens ∩ document tokens| / |query tokens|, computed
    over case-folded whitespace tokens (as sets). Hand-checkable.
    """

    def rerank_scores(self, query: str, documents: Sequence[str]) -> list[float]:
        if not documents:
            raise ValueError("documents must be non-empty")
        query_tokens = set(query.casefold().split())
        if not query_tokens:
            return [0.0] * len(documents)
        return [
            len(query_tokens & set(doc.casefold().split())) / len(query_tokens)
            for doc in documents
        ]

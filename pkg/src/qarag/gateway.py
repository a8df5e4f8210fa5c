"""Clients for external model services: generation, embedding, reranking.

The wire protocol follows the widely deployed chat-completions /
embeddings JSON shapes, so any compatible hosted or local server works:

* generation: ``POST {base_url}/v1/chat/completions``
* embedding:  ``POST {base_url}/v1/embeddings``
* reranking:  ``POST {base_url}/v1/rerank`` with ``{"query", "documents"}``
  returning ``{"scores": [...]}``

Transport errors and 5xx responses are retried with exponential backoff
up to ``max_retries``; 4xx responses are terminal. Embedding vectors are
L2-normalized client-side before they are returned.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import httpx
import numpy as np

from .errors import (
    EndpointUnavailableError,
    ProtocolError,
    RequestRejectedError,
)

API_KEY_ENV = "QARAG_API_KEY"

VALID_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class EndpointConfig:
    """Connection settings for one model endpoint."""

    base_url: str
    model_name: str
    api_key: str | None = None
    timeout: float = 60.0
    max_retries: int = 2
    temperature: float = 0.0
    max_batch: int = 64
    max_in_flight: int = 8

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")

    def resolved_api_key(self) -> str | None:
        return self.api_key or os.environ.get(API_KEY_ENV) or None


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in VALID_ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("user", "assistant") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")

    def to_wire(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A unit-norm float32 vector representing a text."""

    values: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def normalized(cls, raw: Sequence[float] | np.ndarray) -> "EmbeddingVector":
        arr = np.asarray(raw, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ProtocolError("protocol error: embedding must be a non-empty vector")
        norm = float(np.linalg.norm(arr))
        if not np.isfinite(norm) or norm == 0.0:
            raise ProtocolError("protocol error: embedding has zero or non-finite norm")
        return cls(values=(arr / norm).astype(np.float32))


def _check_generate_preconditions(messages: Sequence[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[-1].role != "user":
        raise ValueError("last message must have role 'user'")


def _check_embed_preconditions(texts: Sequence[str], max_batch: int) -> None:
    if not 1 <= len(texts) <= max_batch:
        raise ValueError(f"batch size must be in [1, {max_batch}], got {len(texts)}")
    for i, text in enumerate(texts):
        if not text:
            raise ValueError(f"input text at position {i} is empty")


@runtime_checkable
class GenerationClient(Protocol):
    def generate(self, messages: Sequence[ChatMessage]) -> str: ...


@runtime_checkable
class EmbeddingClient(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


@runtime_checkable
class RerankClient(Protocol):
    def rerank_scores(self, query: str, documents: Sequence[str]) -> list[float]: ...


class _HttpEndpoint:
    """Shared POST-with-retries machinery for the concrete clients."""

    def __init__(
        self,
        config: EndpointConfig,
        *,
        transport: httpx.BaseTransport | None = None,
        backoff: float = 0.25,
    ):
        self.config = config
        self._backoff = backoff
        self._slots = threading.BoundedSemaphore(config.max_in_flight)
        headers = {}
        key = config.resolved_api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout,
            headers=headers,
            transport=transport,
        )

    def _post(self, path: str, body: dict) -> dict:
        attempts = self.config.max_retries + 1
        last_status: int | None = None
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt > 0 and self._backoff > 0:
                time.sleep(self._backoff * (2 ** (attempt - 1)))
            try:
                with self._slots:
                    response = self._http.post(path, json=body)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if 400 <= response.status_code < 500:
                raise RequestRejectedError(
                    f"request rejected by {path}: HTTP {response.status_code}",
                    status=response.status_code,
                )
            if response.status_code >= 500:
                last_status = response.status_code
                continue
            try:
                payload = response.json()
            except ValueError as exc:
                raise ProtocolError(f"protocol error: invalid JSON from {path}") from exc
            if not isinstance(payload, dict):
                raise ProtocolError(f"protocol error: non-object response from {path}")
            return payload
        detail = f"HTTP {last_status}" if last_status is not None else repr(last_error)
        raise EndpointUnavailableError(
            f"endpoint unavailable after {attempts} attempts to {path}: {detail}",
            last_status=last_status,
        )

    def close(self) -> None:
        self._http.close()


class HttpGenerationClient(_HttpEndpoint):
    """Chat-completions client; returns the first choice's assistant text."""

    def generate(self, messages: Sequence[ChatMessage]) -> str:
        _check_generate_preconditions(messages)
        body = {
            "model": self.config.model_name,
            "messages": [m.to_wire() for m in messages],
            "temperature": self.config.temperature,
        }
        payload = self._post("/v1/chat/completions", body)
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(
                "protocol error: missing choices[0].message.content"
            ) from exc
        if not isinstance(content, str):
            raise ProtocolError("protocol error: message content is not a string")
        return content


class HttpEmbeddingClient(_HttpEndpoint):
    """Embeddings client; vectors are normalized before return."""

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        _check_embed_preconditions(texts, self.config.max_batch)
        body = {"model": self.config.model_name, "input": list(texts)}
        payload = self._post("/v1/embeddings", body)
        data = payload.get("data")
        if not isinstance(data, list) or len(data) != len(texts):
            raise ProtocolError(
                f"protocol error: expected {len(texts)} embeddings, "
                f"got {len(data) if isinstance(data, list) else 'none'}"
            )
        vectors: list[EmbeddingVector] = []
        for item in data:
            raw = item.get("embedding") if isinstance(item, dict) else None
            if not isinstance(raw, list):
                raise ProtocolError("protocol error: missing embedding values")
            vectors.append(EmbeddingVector.normalized(raw))
        dims = {v.dimension for v in vectors}
        if len(dims) > 1:
            raise ProtocolError(
                f"protocol error: mixed embedding dimensions in batch: {sorted(dims)}"
            )
        return vectors


class HttpRerankClient(_HttpEndpoint):
    """Cross-encoder relevance scoring client."""

    def rerank_scores(self, query: str, documents: Sequence[str]) -> list[float]:
        if not documents:
            raise ValueError("documents must be non-empty")
        body = {"query": query, "documents": list(documents)}
        payload = self._post("/v1/rerank", body)
        scores = payload.get("scores")
        if not isinstance(scores, list) or len(scores) != len(documents):
            raise ProtocolError(
                f"protocol error: expected {len(documents)} scores, "
                f"got {len(scores) if isinstance(scores, list) else 'none'}"
            )
        try:
            return [float(s) for s in scores]
        except (TypeError, ValueError) as exc:
            raise ProtocolError("protocol error: non-numeric score") from exc


@dataclass
class ModelGateway:
    """The bundle of model clients the pipeline depends on.

    ``tuned`` is the domain-tuned generator used for hypothetical answers.
    The remaining generator roles fall back to ``general`` when left unset:
    ``expansion`` (multiquery variants), ``final`` (final answer agent) and
    ``judge`` (evaluation verdicts).
    """

    embedder: EmbeddingClient
    tuned: GenerationClient
    general: GenerationClient
    reranker: RerankClient
    expansion: GenerationClient | None = None
    final: GenerationClient | None = None
    judge: GenerationClient | None = None
    max_workers: int = 8

    def __post_init__(self):
        if self.expansion is None:
            self.expansion = self.general
        if self.final is None:
            self.final = self.general
        if self.judge is None:
            self.judge = self.general

    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        """Embed any number of texts, batching calls to the embedder's cap."""
        config = getattr(self.embedder, "config", None)
        batch_size = config.max_batch if config is not None else getattr(
            self.embedder, "max_batch", 64
        )
        vectors: list[EmbeddingVector] = []
        for start in range(0, len(texts), batch_size):
            vectors.extend(self.embedder.embed_batch(texts[start : start + batch_size]))
        return vectors

"""Pool scoring and top-n context selection.

Two scorer modes: the cross-encoder rerank endpoint (the production path)
and a per-chunk LLM scoring agent that rates relevance on a ten-point
scale (kept for head-to-head comparison in the benchmark harness).
The query fed to either scorer is always the original question, never a
hypothetical answer.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .corpus import ChunkKey, ChunkStore
from .errors import QaRagError, RerankFailedError
from .gateway import ChatMessage, GenerationClient, RerankClient
from .prompts import load_template
from .retrieval import RetrievedPool

log = logging.getLogger(__name__)

SCORER_MODES = ("cross_encoder", "llm_agent")

_INTEGER = re.compile(r"\d+")


@dataclass(frozen=True)
class ScoredChunk:
    """A pooled chunk with its relevance score against the question."""

    key: ChunkKey
    text: str
    score: float
    scorer: str

    @property
    def doc_id(self) -> str:
        return self.key[0]

    @property
    def chunk_index(self) -> int:
        return self.key[1]


@dataclass(frozen=True)
class SelectionConfig:
    top_n: int = 6

    def __post_init__(self):
        if self.top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")


def rerank_pool(
    question: str,
    pool: RetrievedPool,
    store: ChunkStore,
    reranker: RerankClient,
) -> list[ScoredChunk]:
    """Score every pooled chunk against the question with the cross-encoder.

    One endpoint call; output order matches pool order.
    """
    if not pool.candidates:
        raise ValueError("pool must be non-empty")
    texts = [store.get(c.key).text for c in pool.candidates]
    try:
        scores = reranker.rerank_scores(question, texts)
    except QaRagError as exc:
        raise RerankFailedError(f"rerank failed: {exc}") from exc
    return [
        ScoredChunk(key=c.key, text=text, score=score, scorer="cross_encoder")
        for c, text, score in zip(pool.candidates, texts, scores)
    ]


def _parse_ten_point(reply: str) -> float | None:
    for match in _INTEGER.finditer(reply):
        value = int(match.group())
        if value <= 10:
            return float(value)
    return None


def score_with_llm_agent(
    question: str,
    pool: RetrievedPool,
    store: ChunkStore,
    client: GenerationClient,
    *,
    template: str | None = None,
    max_workers: int = 8,
) -> list[ScoredChunk]:
    """Score each pooled chunk with a generation call on a 0-10 scale.

    Replies are parsed by first-integer extraction (first integer <= 10).
    A chunk whose reply cannot be parsed after one retry scores 0 with a
    logged warning; the batch never aborts. Calls fan out concurrently and
    results are reassembled in pool order.
    """
    if not pool.candidates:
        raise ValueError("pool must be non-empty")
    tpl = template if template is not None else load_template("chunk_score")
    texts = [store.get(c.key).text for c in pool.candidates]

    def score_one(text: str) -> float:
        prompt = tpl.format(question=question, document=text)
        for _ in range(2):
            reply = client.generate([ChatMessage("user", prompt)])
            value = _parse_ten_point(reply)
            if value is not None:
                return value
        log.warning("scoring agent reply unparseable twice; scoring chunk 0")
        return 0.0

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        scores = list(executor.map(score_one, texts))
    return [
        ScoredChunk(key=c.key, text=text, score=score, scorer="llm_agent")
        for c, text, score in zip(pool.candidates, texts, scores)
    ]


def select_top_n(scored: list[ScoredChunk], config: SelectionConfig) -> list[ScoredChunk]:
    """Keep the highest-scoring chunks as the final context set.

    Sorted by descending score; equal scores order by ascending chunk key,
    so selection is invariant under permutation of the input.
    """
    if not scored:
        raise ValueError("scored list must be non-empty")
    ranked = sorted(scored, key=lambda c: (-c.score, c.key))
    return ranked[: min(config.top_n, len(ranked))]

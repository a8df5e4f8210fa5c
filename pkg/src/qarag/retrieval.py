"""Candidate pool construction for a question under one of five strategies.

``dual_track`` splits the pool between chunks retrieved with the question
embedding and chunks retrieved with the embedding of a hypothetical answer
produced by the domain-tuned generator. ``only_question``, ``only_answer``,
``multiquery`` and ``hyde`` are the comparison baselines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import EmptyIndexError, ExpansionParseError, GenerationFailedError, QaRagError
from .corpus import ChunkKey
from .gateway import ChatMessage, GenerationClient, ModelGateway
from .index import VectorIndex
from .prompts import load_template

STRATEGY_KINDS = ("dual_track", "only_question", "only_answer", "multiquery", "hyde")

_NUMBERED_LINE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")


@dataclass(frozen=True)
class RetrievalStrategy:
    """How the candidate pool is built.

    ``pool_size`` is the total number of chunks fetched before reranking;
    ``question_share`` is the number fetched with the question embedding
    under ``dual_track`` (default: half the pool, i.e. 12 of 24);
    ``extra_queries`` is the number of generated variants under
    ``multiquery``.
    """

    kind: str = "dual_track"
    pool_size: int = 24
    question_share: int | None = None
    extra_queries: int = 3

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(
                f"unknown strategy kind {self.kind!r}; valid kinds: {', '.join(STRATEGY_KINDS)}"
            )
        if self.pool_size < 1:
            raise ValueError(f"pool_size must be >= 1, got {self.pool_size}")
        if self.question_share is None:
            object.__setattr__(self, "question_share", self.pool_size // 2)
        if not 0 <= self.question_share <= self.pool_size:
            raise ValueError(
                f"question_share must be in [0, pool_size], got {self.question_share}"
            )
        if self.extra_queries < 1:
            raise ValueError(f"extra_queries must be >= 1, got {self.extra_queries}")
        if self.kind == "multiquery" and self.pool_size % (1 + self.extra_queries) != 0:
            raise ValueError(
                f"pool_size {self.pool_size} must be divisible by "
                f"1 + extra_queries = {1 + self.extra_queries} for multiquery"
            )


@dataclass(frozen=True)
class PoolCandidate:
    key: ChunkKey
    source_track: str
    similarity: float


@dataclass
class RetrievedPool:
    """The deduplicated pre-rerank candidate set, with its audit trail."""

    question: str
    strategy: RetrievalStrategy
    candidates: list[PoolCandidate]
    hypothetical_texts: list[str] = field(default_factory=list)

    def keys(self) -> list[ChunkKey]:
        return [c.key for c in self.candidates]


def hypothetical_answer(
    question: str,
    client: GenerationClient,
    *,
    template: str | None = None,
) -> str:
    """Ask the domain-tuned generator for an answer used as a retrieval probe.

    The returned text is never shown as truth; it is embedded to locate
    chunks whose vocabulary matches an expert answer.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    system = template if template is not None else load_template("hypothetical_answer")
    messages = [ChatMessage("system", system), ChatMessage("user", question)]
    try:
        return client.generate(messages)
    except QaRagError as exc:
        raise GenerationFailedError(
            f"generation failed [answer]: {exc}", track="answer"
        ) from exc


def hyde_document(
    question: str,
    client: GenerationClient,
    *,
    template: str | None = None,
) -> str:
    """Generate a web-search-style hypothetical passage with a general model."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    system = template if template is not None else load_template("hyde_passage")
    messages = [ChatMessage("system", system), ChatMessage("user", question)]
    try:
        return client.generate(messages)
    except QaRagError as exc:
        raise GenerationFailedError(
            f"generation failed [hyde_doc]: {exc}", track="hyde_doc"
        ) from exc


def _parse_numbered(reply: str) -> list[str]:
    return [m.group(1) for line in reply.splitlines() if (m := _NUMBERED_LINE.match(line))]


def multiquery_expand(
    question: str,
    n_extra: int,
    client: GenerationClient,
    *,
    template: str | None = None,
    strict_template: str | None = None,
) -> list[str]:
    """Generate exactly ``n_extra`` rephrasings of the question.

    One generation call asks for a numbered list; if parsing does not yield
    exactly ``n_extra`` usable variants, one retry with a stricter prompt is
    made before giving up.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    if n_extra < 1:
        raise ValueError(f"n_extra must be >= 1, got {n_extra}")
    tpl = template if template is not None else load_template("multiquery")
    strict = strict_template if strict_template is not None else load_template("multiquery_strict")

    for prompt_template in (tpl, strict):
        prompt = prompt_template.format(n=n_extra, question=question)
        try:
            reply = client.generate([ChatMessage("user", prompt)])
        except QaRagError as exc:
            raise GenerationFailedError(
                f"generation failed [query_variant]: {exc}", track="query_variant"
            ) from exc
        variants = [
            v for v in _parse_numbered(reply) if v and v.strip() != question.strip()
        ]
        if len(variants) == n_extra:
            return variants
    raise ExpansionParseError(
        f"expansion parse error: expected {n_extra} variants, got {len(variants)}"
    )


def retrieve(
    question: str,
    strategy: RetrievalStrategy,
    index: VectorIndex,
    gateway: ModelGateway,
    *,
    templates: dict[str, str] | None = None,
) -> RetrievedPool:
    """Build the candidate pool for ``question`` under ``strategy``.

    Tracks are searched in a fixed order (question first, then generated
    texts), and results are merged with per-key deduplication keeping the
    higher-similarity candidate; on a tie the earlier track wins, which
    prefers the question track. Any generation failure aborts the whole
    retrieval so baseline comparisons never see silently degraded pools.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    if len(index) == 0:
        raise EmptyIndexError("empty index")
    templates = templates or {}

    # (track name, text to embed, hits to fetch), in merge order.
    tracks: list[tuple[str, str, int]] = []
    hypothetical_texts: list[str] = []

    if strategy.kind == "dual_track":
        answer_share = strategy.pool_size - strategy.question_share
        if strategy.question_share > 0:
            tracks.append(("question", question, strategy.question_share))
        if answer_share > 0:
            answer = hypothetical_answer(
                question, gateway.tuned, template=templates.get("hypothetical_answer")
            )
            hypothetical_texts.append(answer)
            tracks.append(("answer", answer, answer_share))
    elif strategy.kind == "only_question":
        tracks.append(("question", question, strategy.pool_size))
    elif strategy.kind == "only_answer":
        answer = hypothetical_answer(
            question, gateway.tuned, template=templates.get("hypothetical_answer")
        )
        hypothetical_texts.append(answer)
        tracks.append(("answer", answer, strategy.pool_size))
    elif strategy.kind == "multiquery":
        per_query = strategy.pool_size // (1 + strategy.extra_queries)
        variants = multiquery_expand(
            question,
            strategy.extra_queries,
            gateway.expansion,
            template=templates.get("multiquery"),
            strict_template=templates.get("multiquery_strict"),
        )
        hypothetical_texts.extend(variants)
        tracks.append(("question", question, per_query))
        for i, variant in enumerate(variants, 1):
            tracks.append((f"query_variant_{i}", variant, per_query))
    else:  # hyde
        passage = hyde_document(
            question, gateway.general, template=templates.get("hyde_passage")
        )
        hypothetical_texts.append(passage)
        tracks.append(("hyde_doc", passage, strategy.pool_size))

    vectors = gateway.embed_texts([text for _, text, _ in tracks])

    chosen: dict[ChunkKey, PoolCandidate] = {}
    order: list[ChunkKey] = []
    for (track, _, k), vector in zip(tracks, vectors):
        for hit in index.search_top_k(vector, k):
            current = chosen.get(hit.key)
            if current is None:
                chosen[hit.key] = PoolCandidate(hit.key, track, hit.similarity)
                order.append(hit.key)
            elif hit.similarity > current.similarity:
                chosen[hit.key] = PoolCandidate(hit.key, track, hit.similarity)

    return RetrievedPool(
        question=question,
        strategy=strategy,
        candidates=[chosen[k] for k in order],
        hypothetical_texts=hypothetical_texts,
    )

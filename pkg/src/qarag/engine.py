"""End-to-end pipeline wiring: retrieve -> rerank -> select -> answer."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

from .answer import AnswerConfig, FinalAnswer, generate_final_answer
from .corpus import (
    ChunkingConfig,
    ChunkStore,
    CorpusIngestResult,
    CorpusManifest,
    ingest_corpus,
)
from .gateway import ModelGateway
from .index import VectorIndex
from .rerank import (
    SCORER_MODES,
    ScoredChunk,
    SelectionConfig,
    rerank_pool,
    score_with_llm_agent,
    select_top_n,
)
from .retrieval import RetrievalStrategy, RetrievedPool, retrieve


@dataclass
class AskOutcome:
    """A full pipeline run: the answer plus the pre-rerank pool for audit."""

    answer: FinalAnswer
    pool: RetrievedPool
    selected: list[ScoredChunk]


def index_paths(index_path: Path | str) -> tuple[Path, Path, Path]:
    """Sibling file locations for (index, manifest, chunk store)."""
    base = Path(index_path)
    return base, base.with_name(base.name + ".manifest.json"), base.with_name(
        base.name + ".chunks.jsonl"
    )


@dataclass
class Engine:
    """A loaded corpus (index + chunk texts) bound to a model gateway."""

    index: VectorIndex
    store: ChunkStore
    gateway: ModelGateway
    manifest: CorpusManifest | None = None
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    answer_config: AnswerConfig = field(default_factory=AnswerConfig)
    scorer: str = "cross_encoder"
    templates: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.scorer not in SCORER_MODES:
            raise ValueError(
                f"unknown scorer {self.scorer!r}; valid: {', '.join(SCORER_MODES)}"
            )

    def retrieve(self, question: str, strategy: RetrievalStrategy) -> RetrievedPool:
        return retrieve(
            question, strategy, self.index, self.gateway, templates=self.templates
        )

    def score_pool(self, question: str, pool: RetrievedPool) -> list[ScoredChunk]:
        if self.scorer == "llm_agent":
            return score_with_llm_agent(
                question,
                pool,
                self.store,
                self.gateway.general,
                template=self.templates.get("chunk_score"),
                max_workers=self.gateway.max_workers,
            )
        return rerank_pool(question, pool, self.store, self.gateway.reranker)

    def ask(
        self,
        question: str,
        strategy: RetrievalStrategy | None = None,
        *,
        top_n: int | None = None,
        generate: bool = True,
    ) -> AskOutcome:
        """Run the pipeline for one question.

        ``generate=False`` stops after context selection (used by the
        evaluation harness when only retrieval quality is measured).
        """
        strategy = strategy or RetrievalStrategy()
        selection = SelectionConfig(top_n) if top_n is not None else self.selection
        timings: dict[str, float] = {}

        started = time.perf_counter()
        pool = self.retrieve(question, strategy)
        timings["retrieve"] = (time.perf_counter() - started) * 1000.0

        started = time.perf_counter()
        scored = self.score_pool(question, pool)
        selected = select_top_n(scored, selection)
        timings["rerank"] = (time.perf_counter() - started) * 1000.0

        if generate:
            answer = generate_final_answer(
                question,
                selected,
                self.gateway.final,
                self.answer_config,
                strategy=strategy.kind,
                timings_ms=timings,
            )
        else:
            answer = FinalAnswer(
                text="",
                contexts=selected,
                question=question,
                strategy=strategy.kind,
                timings_ms=timings,
            )
        return AskOutcome(answer=answer, pool=pool, selected=selected)

    # --- corpus building ------------------------------------------------

    @classmethod
    def build(
        cls,
        corpus_dir: Path | str,
        gateway: ModelGateway,
        *,
        chunking: ChunkingConfig | None = None,
        source_tag: str | None = None,
        **engine_kwargs,
    ) -> tuple["Engine", CorpusIngestResult]:
        """Ingest a corpus directory, embed every chunk and index it."""
        result = ingest_corpus(corpus_dir, chunking or ChunkingConfig(), source_tag=source_tag)
        texts = [chunk.text for chunk in result.chunks]
        vectors = gateway.embed_texts(texts)
        index = VectorIndex(vectors[0].dimension)
        for chunk, vector in zip(result.chunks, vectors):
            index.add(chunk.key, vector)
        result.manifest = result.manifest.with_dimension(index.dimension)
        engine = cls(
            index=index,
            store=ChunkStore(result.chunks),
            gateway=gateway,
            manifest=result.manifest,
            **engine_kwargs,
        )
        return engine, result

    def save(self, index_path: Path | str) -> None:
        idx_path, manifest_path, chunks_path = index_paths(index_path)
        self.index.save(idx_path)
        if self.manifest is not None:
            manifest_path.write_text(self.manifest.to_json(), encoding="utf-8")
        self.store.save(chunks_path)

    @classmethod
    def load(
        cls, index_path: Path | str, gateway: ModelGateway, **engine_kwargs
    ) -> "Engine":
        idx_path, manifest_path, chunks_path = index_paths(index_path)
        manifest = None
        if manifest_path.exists():
            manifest = CorpusManifest.from_json(manifest_path.read_text(encoding="utf-8"))
        return cls(
            index=VectorIndex.load(idx_path),
            store=ChunkStore.load(chunks_path),
            gateway=gateway,
            manifest=manifest,
            **engine_kwargs,
        )

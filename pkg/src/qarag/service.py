"""HTTP service exposing ingestion, question answering, and benchmark runs.

All endpoints speak JSON. Asks are stateless and read-only against the
loaded index; ingest and eval runs are single-flight (a concurrent second
request gets 409) and ingest swaps the engine atomically so in-flight
asks keep seeing the old index until the swap completes.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .answer import AnswerConfig
from .config import AppConfig, build_answer_config, build_gateway, load_template_overrides
from .corpus import ChunkingConfig
from .engine import Engine
from .errors import (
    AnswerGenerationError,
    BenchmarkDegradedError,
    GenerationFailedError,
    QaRagError,
    RerankFailedError,
)
from .evaluation import load_dataset, run_benchmark
from .gateway import ModelGateway
from .rerank import SelectionConfig
from .retrieval import STRATEGY_KINDS, RetrievalStrategy

log = logging.getLogger(__name__)


class AskRequest(BaseModel):
    question: str
    strategy: str = "dual_track"
    top_n: int | None = None
    include_pool: bool = False


class IngestRequest(BaseModel):
    path: str | None = None
    documents: list[dict] | None = None
    source_tag: str | None = None


class EvalRequest(BaseModel):
    dataset_path: str
    strategies: list[str] = list(STRATEGY_KINDS)
    generate_answers: bool = True


@dataclass
class ServiceState:
    """Mutable server state: the current engine plus single-flight locks."""

    gateway: ModelGateway
    config: AppConfig
    engine: Engine | None = None
    answer_config: AnswerConfig = field(default_factory=AnswerConfig)
    templates: dict[str, str] = field(default_factory=dict)
    ingest_lock: threading.Lock = field(default_factory=threading.Lock)
    eval_lock: threading.Lock = field(default_factory=threading.Lock)
    swap_lock: threading.Lock = field(default_factory=threading.Lock)

    def current_engine(self) -> Engine | None:
        with self.swap_lock:
            return self.engine

    def swap_engine(self, engine: Engine) -> None:
        with self.swap_lock:
            self.engine = engine


def state_from_config(config: AppConfig) -> ServiceState:
    gateway = build_gateway(config.gateway)
    state = ServiceState(
        gateway=gateway,
        config=config,
        answer_config=build_answer_config(config),
        templates=load_template_overrides(config),
    )
    if config.index_path and Path(config.index_path).exists():
        state.engine = Engine.load(
            config.index_path,
            gateway,
            selection=config.selection,
            answer_config=state.answer_config,
            scorer=config.scorer,
            templates=state.templates,
        )
    return state


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message, **extra})


def _strategy_defaults() -> list[dict]:
    base = RetrievalStrategy()
    return [
        {
            "kind": kind,
            "pool_size": base.pool_size,
            "question_share": base.question_share,
            "extra_queries": base.extra_queries,
            "top_n": SelectionConfig().top_n,
        }
        for kind in STRATEGY_KINDS
    ]


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="qarag", docs_url=None, redoc_url=None)
    app.state.qarag = state

    if state.config.ui_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[state.config.ui_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return _error(400, f"invalid request: {exc.errors()[0].get('msg', 'bad body')}")

    @app.get("/api/health")
    def health():
        engine = state.current_engine()
        return {
            "status": "ok" if engine is not None else "empty",
            "index_size": len(engine.index) if engine else 0,
            "dimension": engine.index.dimension if engine else 0,
        }

    @app.get("/api/strategies")
    def strategies():
        return {"strategies": _strategy_defaults()}

    @app.post("/api/ask")
    def ask(request: AskRequest):
        question = request.question.strip()
        if not question:
            return _error(400, "invalid request: question must be non-empty")
        if request.strategy not in STRATEGY_KINDS:
            return _error(
                400,
                f"invalid request: unknown strategy {request.strategy!r}",
                valid_strategies=list(STRATEGY_KINDS),
            )
        if request.top_n is not None and request.top_n < 1:
            return _error(400, "invalid request: top_n must be >= 1")
        engine = state.current_engine()
        if engine is None:
            return _error(503, "index not loaded; ingest a corpus first")

        defaults = state.config.strategy
        strategy = RetrievalStrategy(
            kind=request.strategy,
            pool_size=defaults.pool_size,
            question_share=defaults.question_share,
            extra_queries=defaults.extra_queries,
        )
        try:
            outcome = engine.ask(question, strategy, top_n=request.top_n)
        except GenerationFailedError as exc:
            return _error(502, str(exc), stage="retrieve")
        except RerankFailedError as exc:
            return _error(502, str(exc), stage="rerank")
        except AnswerGenerationError as exc:
            return _error(502, str(exc), stage="generate")
        except QaRagError as exc:
            return _error(502, str(exc), stage="pipeline")

        track_by_key = {c.key: c.source_track for c in outcome.pool.candidates}
        body = {
            "answer": outcome.answer.text,
            "contexts": [
                {
                    "doc_id": c.doc_id,
                    "chunk_index": c.chunk_index,
                    "score": c.score,
                    "text": c.text,
                    "source_track": track_by_key.get(c.key, "question"),
                }
                for c in outcome.selected
            ],
            "hypothetical_texts": outcome.pool.hypothetical_texts,
            "timings_ms": outcome.answer.timings_ms,
            "strategy": request.strategy,
        }
        if request.include_pool:
            body["pool"] = [
                {
                    "doc_id": c.key[0],
                    "chunk_index": c.key[1],
                    "similarity": c.similarity,
                    "source_track": c.source_track,
                }
                for c in outcome.pool.candidates
            ]
        return body

    @app.post("/api/ingest")
    def ingest(request: IngestRequest):
        if not request.path and not request.documents:
            return _error(400, "invalid request: provide 'path' or 'documents'")
        if not state.ingest_lock.acquire(blocking=False):
            return _error(409, "an ingest is already running")
        try:
            engine, errors = _build_engine(state, request)
            state.swap_engine(engine)
            if state.config.index_path:
                engine.save(state.config.index_path)
        except QaRagError as exc:
            return _error(400, str(exc))
        finally:
            state.ingest_lock.release()
        return {
            "documents": len(engine.manifest.documents) if engine.manifest else 0,
            "chunks": len(engine.store),
            "embedded": len(engine.index),
            "errors": errors,
        }

    @app.post("/api/eval/run")
    def eval_run(request: EvalRequest):
        engine = state.current_engine()
        if engine is None:
            return _error(503, "index not loaded; ingest a corpus first")
        unknown = [k for k in request.strategies if k not in STRATEGY_KINDS]
        if unknown:
            return _error(
                400,
                f"invalid request: unknown strategies {unknown}",
                valid_strategies=list(STRATEGY_KINDS),
            )
        if not state.eval_lock.acquire(blocking=False):
            return _error(409, "an eval run is already active")
        try:
            dataset = load_dataset(request.dataset_path)
            defaults = state.config.strategy
            strategies_list = [
                RetrievalStrategy(
                    kind=kind,
                    pool_size=defaults.pool_size,
                    question_share=defaults.question_share,
                    extra_queries=defaults.extra_queries,
                )
                for kind in request.strategies
            ]
            report, records = run_benchmark(
                dataset,
                strategies_list,
                engine,
                generate_answers=request.generate_answers,
                templates=state.templates,
            )
        except BenchmarkDegradedError as exc:
            return _error(502, str(exc), stage="benchmark")
        except QaRagError as exc:
            return _error(400, str(exc))
        finally:
            state.eval_lock.release()
        return {
            "strategies": report.strategies,
            "example_count": report.example_count,
            "failed_rows": report.failed_rows,
            "rows": len(records),
            "config": report.config,
        }

    return app


def _build_engine(state: ServiceState, request: IngestRequest) -> tuple[Engine, list[dict]]:
    from .corpus import ChunkStore, ingest_document
    from .index import VectorIndex

    chunking = state.config.chunking or ChunkingConfig()
    engine_kwargs = dict(
        selection=state.config.selection,
        answer_config=state.answer_config,
        scorer=state.config.scorer,
        templates=state.templates,
    )
    if request.path:
        engine, result = Engine.build(
            request.path,
            state.gateway,
            chunking=chunking,
            source_tag=request.source_tag,
            **engine_kwargs,
        )
        return engine, [{"path": e.path, "message": e.message} for e in result.errors]

    documents = []
    chunks = []
    errors: list[dict] = []
    for i, entry in enumerate(request.documents or []):
        text = entry.get("text", "")
        name = entry.get("title", f"inline-{i}")
        try:
            doc, doc_chunks = ingest_document(
                text.encode("utf-8"),
                entry.get("source_tag", request.source_tag or "inline"),
                chunking,
                name=name,
                title=entry.get("title", name),
            )
        except QaRagError as exc:
            errors.append({"path": name, "message": str(exc)})
            continue
        if any(d.doc_id == doc.doc_id for d in documents):
            errors.append({"path": name, "message": "duplicate document content"})
            continue
        documents.append(doc)
        chunks.extend(doc_chunks)
    if not chunks:
        raise QaRagError("empty corpus: no ingestible documents in request")

    vectors = state.gateway.embed_texts([c.text for c in chunks])
    index = VectorIndex(vectors[0].dimension)
    for chunk, vector in zip(chunks, vectors):
        index.add(chunk.key, vector)
    from .corpus import CorpusManifest, ManifestEntry

    manifest = CorpusManifest(
        documents=tuple(
            ManifestEntry(
                doc_id=d.doc_id,
                source_tag=d.source_tag,
                title=d.title,
                chunk_count=sum(1 for c in chunks if c.doc_id == d.doc_id),
            )
            for d in documents
        )
    ).with_dimension(index.dimension)
    engine = Engine(
        index=index,
        store=ChunkStore(chunks),
        gateway=state.gateway,
        manifest=manifest,
        **engine_kwargs,
    )
    return engine, errors


def serve(config: AppConfig) -> None:
    """Run the service under uvicorn until signalled; exits 0 on SIGTERM."""
    import signal as signal_module

    import uvicorn

    class GracefulServer(uvicorn.Server):
        # Drain in-flight requests and exit 0 instead of re-raising the
        # signal (uvicorn's default), so a clean stop reads as success.
        def handle_exit(self, sig: int, frame) -> None:
            if self.should_exit and sig == signal_module.SIGINT:
                self.force_exit = True
            else:
                self.should_exit = True

    state = state_from_config(config)
    app = create_app(state)
    host, port = config.resolved_listen()
    GracefulServer(uvicorn.Config(app, host=host, port=port, log_level="info")).run()

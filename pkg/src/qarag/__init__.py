"""Retrieval-augmented question answering over regulatory guideline corpora.

Dual-track retrieval (question + hypothetical expert answer), exact dense
similarity search, cross-encoder reranking, few-shot answer generation,
and a benchmark harness comparing five retrieval strategies.
"""

from .answer import AnswerConfig, FewShotExample, FinalAnswer, build_prompt, generate_final_answer
from .corpus import (
    Chunk,
    ChunkKey,
    ChunkStore,
    ChunkingConfig,
    CorpusManifest,
    Document,
    chunk_text,
    ingest_corpus,
    ingest_document,
)
from .engine import AskOutcome, Engine
from .evaluation import (
    EvalRecord,
    MetricReport,
    QAExample,
    context_precision,
    context_recall,
    judge_relevance,
    load_dataset,
    run_benchmark,
    split_statements,
    token_f1,
)
from .gateway import (
    ChatMessage,
    EmbeddingVector,
    EndpointConfig,
    HttpEmbeddingClient,
    HttpGenerationClient,
    HttpRerankClient,
    ModelGateway,
)
from .index import SearchHit, VectorIndex
from .mocks import FunctionGenerator, MockEmbedder, MockGenerator, MockReranker
from .rerank import (
    ScoredChunk,
    SelectionConfig,
    rerank_pool,
    score_with_llm_agent,
    select_top_n,
)
from .retrieval import (
    STRATEGY_KINDS,
    RetrievalStrategy,
    RetrievedPool,
    hyde_document,
    hypothetical_answer,
    multiquery_expand,
    retrieve,
)

__version__ = "0.1.0"

"""Application configuration: TOML or JSON files plus environment overrides.

A config file wires endpoint settings, chunking, strategy defaults and
template overrides for the CLI and the HTTP service. The ``[gateway]``
section selects ``mode = "http"`` (real endpoints) or ``mode = "mock"``
(the deterministic in-process mocks, used for offline runs and tests).
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .answer import AnswerConfig, FewShotExample
from .corpus import ChunkingConfig
from .gateway import (
    EndpointConfig,
    HttpEmbeddingClient,
    HttpGenerationClient,
    HttpRerankClient,
    ModelGateway,
)
from .mocks import MockEmbedder, MockGenerator, MockReranker
from .rerank import SelectionConfig
from .retrieval import RetrievalStrategy

LISTEN_ENV = "QARAG_LISTEN"
DEFAULT_LISTEN = "127.0.0.1:8080"

#: Generator roles accepted under [gateway.endpoints]; embedding and rerank
#: are separate endpoint kinds.
GENERATOR_ROLES = ("tuned", "general", "expansion", "final", "judge")


@dataclass
class GatewayConfig:
    mode: str = "mock"
    seed: int = 0
    dimension: int = 64
    max_workers: int = 8
    generator_mode: str = "echo"
    keyword_replies: dict[str, str] = field(default_factory=dict)
    keyword_replies_path: str | None = None
    default_reply: str = "No matching guideline was found."
    endpoints: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("mock", "http"):
            raise ValueError(f"gateway mode must be 'mock' or 'http', got {self.mode!r}")


@dataclass
class AppConfig:
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    strategy: RetrievalStrategy = field(default_factory=RetrievalStrategy)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    scorer: str = "cross_encoder"
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    index_path: str | None = None
    listen: str = DEFAULT_LISTEN
    ui_origin: str | None = None
    templates: dict[str, str] = field(default_factory=dict)
    fewshot_path: str | None = None

    def resolved_listen(self) -> tuple[str, int]:
        listen = os.environ.get(LISTEN_ENV) or self.listen
        host, _, port = listen.rpartition(":")
        return host or "127.0.0.1", int(port)


def _load_raw(path: Path) -> dict:
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_config(path: Path | str | None) -> AppConfig:
    """Load an AppConfig from a .toml/.json file; None gives defaults."""
    if path is None:
        return AppConfig()
    path = Path(path)
    raw = _load_raw(path)

    chunking_raw = raw.get("chunking", {})
    strategy_raw = raw.get("strategy", {})
    gateway_raw = dict(raw.get("gateway", {}))
    endpoints = gateway_raw.pop("endpoints", {})
    mock_raw = gateway_raw.pop("mock", {})

    keyword_replies = dict(mock_raw.get("keyword_replies", {}))
    replies_path = mock_raw.get("keyword_replies_path")
    if replies_path:
        replies_file = Path(replies_path)
        if not replies_file.is_absolute():
            replies_file = path.parent / replies_file
        keyword_replies.update(json.loads(replies_file.read_text(encoding="utf-8")))

    config = AppConfig(
        chunking=ChunkingConfig(
            chunk_size=chunking_raw.get("chunk_size", 10_000),
            overlap=chunking_raw.get("overlap", 2_000),
        ),
        strategy=RetrievalStrategy(
            kind=strategy_raw.get("kind", "dual_track"),
            pool_size=strategy_raw.get("pool_size", 24),
            question_share=strategy_raw.get("question_share", 12),
            extra_queries=strategy_raw.get("extra_queries", 3),
        ),
        selection=SelectionConfig(top_n=raw.get("selection", {}).get("top_n", 6)),
        scorer=raw.get("scorer", "cross_encoder"),
        gateway=GatewayConfig(
            mode=gateway_raw.get("mode", "mock"),
            seed=gateway_raw.get("seed", 0),
            dimension=gateway_raw.get("dimension", 64),
            max_workers=gateway_raw.get("max_workers", 8),
            generator_mode=mock_raw.get("generator_mode", "echo"),
            keyword_replies=keyword_replies,
            default_reply=mock_raw.get(
                "default_reply", "No matching guideline was found."
            ),
            endpoints=endpoints,
        ),
        index_path=raw.get("index_path"),
        listen=raw.get("listen", DEFAULT_LISTEN),
        ui_origin=raw.get("ui_origin"),
        templates=dict(raw.get("templates", {})),
        fewshot_path=raw.get("fewshot_path"),
    )
    return config


def _endpoint_from_raw(raw: dict) -> EndpointConfig:
    return EndpointConfig(
        base_url=raw["base_url"],
        model_name=raw.get("model_name", ""),
        api_key=raw.get("api_key"),
        timeout=raw.get("timeout", 60.0),
        max_retries=raw.get("max_retries", 2),
        temperature=raw.get("temperature", 0.0),
        max_batch=raw.get("max_batch", 64),
        max_in_flight=raw.get("max_in_flight", 8),
    )


def build_gateway(config: GatewayConfig) -> ModelGateway:
    """Construct the model client bundle described by ``config``."""
    if config.mode == "mock":
        if config.generator_mode == "keyword":
            tuned = MockGenerator(
                "keyword",
                replies=config.keyword_replies,
                default_reply=config.default_reply,
            )
        else:
            tuned = MockGenerator("echo")
        return ModelGateway(
            embedder=MockEmbedder(dimension=config.dimension, seed=config.seed),
            tuned=tuned,
            general=MockGenerator("echo"),
            reranker=MockReranker(),
            max_workers=config.max_workers,
        )

    endpoints = config.endpoints
    for required in ("tuned", "general", "embedding", "rerank"):
        if required not in endpoints:
            raise ValueError(f"http gateway config missing [gateway.endpoints.{required}]")
    generators = {
        role: HttpGenerationClient(_endpoint_from_raw(endpoints[role]))
        for role in GENERATOR_ROLES
        if role in endpoints
    }
    return ModelGateway(
        embedder=HttpEmbeddingClient(_endpoint_from_raw(endpoints["embedding"])),
        tuned=generators["tuned"],
        general=generators["general"],
        reranker=HttpRerankClient(_endpoint_from_raw(endpoints["rerank"])),
        expansion=generators.get("expansion"),
        final=generators.get("final"),
        judge=generators.get("judge"),
        max_workers=config.max_workers,
    )


def build_answer_config(config: AppConfig) -> AnswerConfig:
    from .prompts import load_default_fewshot

    if config.fewshot_path:
        rows = json.loads(Path(config.fewshot_path).read_text(encoding="utf-8"))
    else:
        rows = load_default_fewshot()
    examples = [FewShotExample(question=r["question"], answer=r["answer"]) for r in rows]
    template = None
    if "final_answer" in config.templates:
        template = Path(config.templates["final_answer"]).read_text(encoding="utf-8")
    return AnswerConfig(template=template, examples=examples)


def load_template_overrides(config: AppConfig) -> dict[str, str]:
    """Read template override files named in the config into strings."""
    overrides: dict[str, str] = {}
    for name, file_path in config.templates.items():
        if name == "final_answer":
            continue  # handled by build_answer_config
        overrides[name] = Path(file_path).read_text(encoding="utf-8")
    return overrides

"""Operator command line: ingest, ask, eval, serve.

Exit codes: 0 success, 1 fatal error, 2 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import AppConfig, build_answer_config, build_gateway, load_config, load_template_overrides
from .engine import Engine
from .errors import BenchmarkDegradedError, QaRagError
from .evaluation import load_dataset, render_report_table, run_benchmark
from .retrieval import STRATEGY_KINDS, RetrievalStrategy


def _load_app_config(config_path: str | None) -> AppConfig:
    try:
        return load_config(config_path)
    except (OSError, ValueError, KeyError) as exc:
        raise click.ClickException(f"cannot load config {config_path}: {exc}") from exc


def _engine_kwargs(app_config: AppConfig) -> dict:
    return dict(
        selection=app_config.selection,
        answer_config=build_answer_config(app_config),
        scorer=app_config.scorer,
        templates=load_template_overrides(app_config),
    )


def _load_engine(app_config: AppConfig, index: str | None) -> Engine:
    index_path = index or app_config.index_path
    if not index_path or not Path(index_path).exists():
        raise click.ClickException(
            "no index found; run ingest first (or pass --index / set index_path)"
        )
    gateway = build_gateway(app_config.gateway)
    return Engine.load(index_path, gateway, **_engine_kwargs(app_config))


def _strategy(
    app_config: AppConfig,
    kind: str | None,
    pool_size: int | None = None,
    question_share: int | None = None,
) -> RetrievalStrategy:
    base = app_config.strategy
    return RetrievalStrategy(
        kind=kind or base.kind,
        pool_size=pool_size if pool_size is not None else base.pool_size,
        question_share=(
            question_share if question_share is not None else base.question_share
        ),
        extra_queries=base.extra_queries,
    )


def _apply_overrides(app_config: AppConfig, scorer: str | None) -> AppConfig:
    if scorer is not None:
        app_config.scorer = scorer
    return app_config


def _echo_effective_config(
    app_config: AppConfig, strategy: RetrievalStrategy, top_n: int | None
) -> None:
    click.echo(
        "effective config: "
        f"strategy={strategy.kind} pool_size={strategy.pool_size} "
        f"question_share={strategy.question_share} extra_queries={strategy.extra_queries} "
        f"top_n={top_n if top_n is not None else app_config.selection.top_n} "
        f"scorer={app_config.scorer} gateway={app_config.gateway.mode}",
        err=True,
    )


@click.group()
def main():
    """Retrieval-augmented QA over guideline corpora."""


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(), help="Directory of .txt/.md files.")
@click.option("--index", "index_path", required=True, type=click.Path(), help="Output index file.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--source-tag", default=None, help="Provenance label for the documents.")
def ingest(corpus_dir, index_path, config_path, source_tag):
    """Chunk, embed, and index a corpus directory."""
    app_config = _load_app_config(config_path)
    gateway = build_gateway(app_config.gateway)
    try:
        engine, result = Engine.build(
            corpus_dir,
            gateway,
            chunking=app_config.chunking,
            source_tag=source_tag,
            **_engine_kwargs(app_config),
        )
    except QaRagError as exc:
        raise click.ClickException(str(exc)) from exc
    engine.save(index_path)
    click.echo(f"documents: {len(result.manifest.documents)}")
    click.echo(f"chunks: {len(result.chunks)}")
    click.echo(f"dimension: {engine.index.dimension}")
    for error in result.errors:
        click.echo(f"skipped {error.path}: {error.message}", err=True)


@main.command()
@click.option("--question", required=True, help="Question to answer.")
@click.option("--strategy", "kind", type=click.Choice(STRATEGY_KINDS), default=None)
@click.option("--index", "index_path", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--top-n", type=int, default=None)
@click.option("--pool-size", type=int, default=None)
@click.option("--question-share", type=int, default=None)
@click.option("--scorer", type=click.Choice(("cross_encoder", "llm_agent")), default=None)
@click.option("--show-contexts", is_flag=True, help="Print the selected chunks.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.option("--verbose", is_flag=True, help="Print the effective configuration.")
def ask(question, kind, index_path, config_path, top_n, pool_size, question_share,
        scorer, show_contexts, as_json, verbose):
    """Run the full pipeline for one question and print the answer."""
    app_config = _apply_overrides(_load_app_config(config_path), scorer)
    engine = _load_engine(app_config, index_path)
    strategy = _strategy(app_config, kind, pool_size, question_share)
    if verbose:
        _echo_effective_config(app_config, strategy, top_n)
    try:
        outcome = engine.ask(question, strategy, top_n=top_n)
    except QaRagError as exc:
        raise click.ClickException(str(exc)) from exc

    if as_json:
        track_by_key = {c.key: c.source_track for c in outcome.pool.candidates}
        click.echo(
            json.dumps(
                {
                    "answer": outcome.answer.text,
                    "strategy": strategy.kind,
                    "contexts": [
                        {
                            "doc_id": c.doc_id,
                            "chunk_index": c.chunk_index,
                            "score": c.score,
                            "source_track": track_by_key.get(c.key, "question"),
                        }
                        for c in outcome.selected
                    ],
                    "hypothetical_texts": outcome.pool.hypothetical_texts,
                    "timings_ms": outcome.answer.timings_ms,
                },
                sort_keys=True,
            )
        )
        return

    click.echo(outcome.answer.text)
    if outcome.pool.hypothetical_texts:
        click.echo(
            f"[{len(outcome.pool.hypothetical_texts)} hypothetical text(s) "
            f"used for retrieval]",
            err=True,
        )
    if show_contexts:
        click.echo("")
        for i, chunk in enumerate(outcome.selected, 1):
            click.echo(f"[{i}] doc={chunk.doc_id} chunk={chunk.chunk_index} score={chunk.score:.4f}")
            click.echo(chunk.text)
            click.echo("")


@main.command("eval")
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--strategies", default=",".join(STRATEGY_KINDS), help="Comma-separated strategy kinds.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--index", "index_path", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--pool-size", type=int, default=None)
@click.option("--question-share", type=int, default=None)
@click.option("--scorer", type=click.Choice(("cross_encoder", "llm_agent")), default=None)
@click.option("--no-answers", is_flag=True, help="Skip answer generation; retrieval metrics only.")
@click.option("--verbose", is_flag=True, help="Print the effective configuration.")
def eval_command(dataset_path, strategies, out_dir, index_path, config_path,
                 pool_size, question_share, scorer, no_answers, verbose):
    """Benchmark retrieval strategies over a JSONL dataset."""
    app_config = _apply_overrides(_load_app_config(config_path), scorer)
    engine = _load_engine(app_config, index_path)

    kinds = [k.strip() for k in strategies.split(",") if k.strip()]
    unknown = [k for k in kinds if k not in STRATEGY_KINDS]
    if unknown:
        raise click.BadParameter(f"unknown strategies: {', '.join(unknown)}")
    strategy_list = [_strategy(app_config, k, pool_size, question_share) for k in kinds]
    if verbose:
        _echo_effective_config(app_config, strategy_list[0], None)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        dataset = load_dataset(dataset_path)
        report, records = run_benchmark(
            dataset,
            strategy_list,
            engine,
            generate_answers=not no_answers,
            records_path=out / "records.jsonl",
            templates=engine.templates,
        )
    except BenchmarkDegradedError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)
    except QaRagError as exc:
        raise click.ClickException(str(exc)) from exc

    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    table = render_report_table(report)
    (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    click.echo(table)
    click.echo(f"\nrows: {len(records)}  failed: {report.failed_rows}")
    click.echo(f"wrote {out / 'report.json'}, {out / 'records.jsonl'}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
def serve(config_path):
    """Start the HTTP service; blocks until interrupted."""
    from .service import serve as run_service

    app_config = _load_app_config(config_path)
    run_service(app_config)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Offline strategy comparison on the synthetic planted-relevance corpus.

Builds a 40-document corpus with 20 planted question/document pairs,
ingests it with the deterministic mock gateway, runs all five retrieval
strategies through the benchmark harness, and prints the metric table.
No network, reproducible for a fixed seed.
"""

import argparse
import tempfile
from pathlib import Path

from qarag import Engine, MockEmbedder, MockGenerator, MockReranker, ModelGateway, run_benchmark
from qarag.evaluation import render_report_table
from qarag.retrieval import STRATEGY_KINDS, RetrievalStrategy
from qarag.synth import generate_synthetic_corpus, marker_judge, variant_expander


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=20, help="planted QA pairs")
    parser.add_argument("--distractors", type=int, default=20)
    parser.add_argument("--seed", type=int, default=1234, help="mock embedder seed")
    parser.add_argument("--out", type=Path, default=None, help="directory for report files")
    parser.add_argument("--no-answers", action="store_true", help="retrieval metrics only")
    args = parser.parse_args()

    corpus = generate_synthetic_corpus(args.pairs, args.distractors, seed=0)
    gateway = ModelGateway(
        embedder=MockEmbedder(dimension=64, seed=args.seed),
        tuned=MockGenerator("keyword", replies=corpus.tuned_replies),
        general=MockGenerator("echo"),
        expansion=variant_expander(),
        reranker=MockReranker(),
        judge=marker_judge(),
    )

    with tempfile.TemporaryDirectory() as tmp:
        corpus_dir = corpus.write_files(Path(tmp) / "corpus")
        engine, result = Engine.build(corpus_dir, gateway)
        print(f"ingested {len(result.manifest.documents)} documents, "
              f"{len(result.chunks)} chunks, dim {engine.index.dimension}")

        strategies = [RetrievalStrategy(kind=k) for k in STRATEGY_KINDS]
        records_path = args.out / "records.jsonl" if args.out else None
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
        report, records = run_benchmark(
            corpus.dataset,
            strategies,
            engine,
            generate_answers=not args.no_answers,
            records_path=records_path,
        )

    print()
    print(render_report_table(report))
    print(f"\nrows: {len(records)}  failed: {report.failed_rows}")
    if args.out:
        (args.out / "report.json").write_text(report.to_json(), encoding="utf-8")
        print(f"wrote {args.out / 'report.json'} and {records_path}")


if __name__ == "__main__":
    main()

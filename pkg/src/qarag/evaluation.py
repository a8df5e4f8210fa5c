"""Benchmark harness: retrieval-quality metrics and multi-strategy runs.

Context precision is the rank-weighted fraction of selected contexts an
LLM judge deems relevant; context recall is the fraction of reference-
answer statements attributable to the selected contexts. Answer quality
uses a deterministic token-overlap F1 proxy; a semantic scorer with the
same (precision, recall, f1) contract can be plugged in via the gateway.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .engine import Engine
from .errors import (
    BenchmarkDegradedError,
    DatasetParseError,
    QaRagError,
)
from .gateway import ChatMessage, GenerationClient
from .prompts import load_template
from .rerank import ScoredChunk
from .retrieval import RetrievalStrategy

log = logging.getLogger(__name__)

_VERDICT_TOKEN = re.compile(r"[a-zA-Z]+")
_NUMBERED_LINE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class QAExample:
    id: str
    question: str
    reference_answer: str

    def __post_init__(self):
        if not self.id or not self.question or not self.reference_answer:
            raise ValueError("QAExample fields must all be non-empty")


@dataclass
class EvalRecord:
    """One benchmark row: metrics for (example, strategy).

    Metric fields are None when the corresponding stage did not run;
    ``error`` is set when the row failed entirely.
    """

    example_id: str
    strategy: str
    contexts: list[ScoredChunk] = field(default_factory=list)
    generated_answer: str | None = None
    context_precision: float | None = None
    context_recall: float | None = None
    answer_precision: float | None = None
    answer_recall: float | None = None
    answer_f1: float | None = None
    judge_transcripts: list[dict] = field(default_factory=list)
    error: str | None = None

    def to_row(self) -> dict:
        row: dict = {
            "example_id": self.example_id,
            "strategy": self.strategy,
            "contexts": [
                {"doc_id": c.doc_id, "chunk_index": c.chunk_index, "score": c.score}
                for c in self.contexts
            ],
            "judge_transcripts": self.judge_transcripts,
        }
        if self.error is not None:
            row["error"] = self.error
        for name in (
            "generated_answer",
            "context_precision",
            "context_recall",
            "answer_precision",
            "answer_recall",
            "answer_f1",
        ):
            value = getattr(self, name)
            if value is not None:
                row[name] = value
        return row


@dataclass
class MetricReport:
    """Per-strategy metric means over the non-failed benchmark rows."""

    strategies: dict[str, dict[str, float]]
    example_count: int
    failed_rows: int
    config: dict

    def to_json(self) -> str:
        payload = {
            "strategies": self.strategies,
            "example_count": self.example_count,
            "failed_rows": self.failed_rows,
            "config": self.config,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


# --- judge calls --------------------------------------------------------


def _parse_verdict(reply: str) -> bool | None:
    match = _VERDICT_TOKEN.search(reply)
    if match is None:
        return None
    token = match.group().casefold()
    if token == "yes":
        return True
    if token == "no":
        return False
    return None


def _judged_verdict(
    prompt: str,
    judge: GenerationClient,
    *,
    kind: str,
    transcripts: list[dict] | None,
) -> bool:
    """One yes/no judgment with a single retry; unparseable counts as no.

    The warning lands in ``transcripts`` when an audit sink is provided
    (the benchmark records it per row); otherwise it is logged.
    """
    verdict: bool | None = None
    reply = ""
    for _ in range(2):
        reply = judge.generate([ChatMessage("user", prompt)])
        verdict = _parse_verdict(reply)
        if verdict is not None:
            break
    warning = None
    if verdict is None:
        verdict = False
        warning = "unparseable verdict after retry; counted as no"
        if transcripts is None:
            log.warning("%s judgment unparseable: %r", kind, reply[:80])
    if transcripts is not None:
        entry = {"kind": kind, "reply": reply, "verdict": verdict}
        if warning:
            entry["warning"] = warning
        transcripts.append(entry)
    return verdict


def judge_relevance(
    question: str,
    context_text: str,
    judge: GenerationClient,
    *,
    template: str | None = None,
    transcripts: list[dict] | None = None,
) -> bool:
    if not question or not context_text:
        raise ValueError("question and context_text must be non-empty")
    tpl = template if template is not None else load_template("judge_relevance")
    prompt = tpl.format(question=question, context=context_text)
    return _judged_verdict(prompt, judge, kind="relevance", transcripts=transcripts)


def context_precision(verdicts: Sequence[bool]) -> float:
    """Rank-weighted precision over an ordered relevance verdict vector.

    Sum of precision@k at each relevant rank k, divided by the number of
    relevant contexts; 0.0 when nothing is relevant.
    """
    if not verdicts:
        raise ValueError("verdicts must be non-empty")
    relevant = 0
    total = 0.0
    for k, verdict in enumerate(verdicts, 1):
        if verdict:
            relevant += 1
            total += relevant / k
    return total / relevant if relevant else 0.0


def split_statements(
    reference_answer: str,
    judge: GenerationClient,
    *,
    template: str | None = None,
) -> list[str]:
    """Decompose an answer into atomic statements via the judge model.

    Falls back to sentence splitting on terminal punctuation when the
    reply has no numbered lines; always returns at least one statement.
    """
    if not reference_answer.strip():
        raise ValueError("reference_answer must be non-empty")
    tpl = template if template is not None else load_template("split_statements")
    reply = judge.generate([ChatMessage("user", tpl.format(answer=reference_answer))])
    statements = [m.group(1) for line in reply.splitlines() if (m := _NUMBERED_LINE.match(line))]
    if statements:
        return statements
    sentences = [s.strip() for s in _SENTENCE_SPLIT.split(reference_answer.strip())]
    sentences = [s for s in sentences if s]
    return sentences or [reference_answer.strip()]


def context_recall(
    statements: Sequence[str],
    contexts: Sequence[str],
    judge: GenerationClient,
    *,
    template: str | None = None,
    transcripts: list[dict] | None = None,
) -> float:
    """Fraction of statements attributable to the concatenated contexts."""
    if not statements:
        raise ValueError("statements must be non-empty")
    tpl = template if template is not None else load_template("judge_attribution")
    joined = "\n\n".join(contexts)
    attributed = 0
    for statement in statements:
        prompt = tpl.format(statement=statement, contexts=joined)
        if _judged_verdict(prompt, judge, kind="attribution", transcripts=transcripts):
            attributed += 1
    return attributed / len(statements)


def token_f1(generated: str, reference: str) -> tuple[float, float, float]:
    """Multiset token overlap (precision, recall, f1) over case-folded
    whitespace tokens. Deterministic proxy for semantic answer scoring."""
    if not generated or not reference:
        raise ValueError("generated and reference must be non-empty")
    gen_tokens = Counter(generated.casefold().split())
    ref_tokens = Counter(reference.casefold().split())
    overlap = sum((gen_tokens & ref_tokens).values())
    gen_total = sum(gen_tokens.values())
    ref_total = sum(ref_tokens.values())
    precision = overlap / gen_total if gen_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


# --- dataset ------------------------------------------------------------


def load_dataset(path: Path | str) -> list[QAExample]:
    """Load a JSONL dataset of {"id", "question", "answer"} rows."""
    examples: list[QAExample] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                example = QAExample(
                    id=str(row["id"]),
                    question=row["question"],
                    reference_answer=row["answer"],
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetParseError(
                    f"dataset parse error at line {line_number}: {exc}",
                    line_number=line_number,
                ) from exc
            if example.id in seen:
                raise DatasetParseError(
                    f"dataset parse error at line {line_number}: duplicate id {example.id!r}",
                    line_number=line_number,
                )
            seen.add(example.id)
            examples.append(example)
    if not examples:
        raise DatasetParseError("dataset parse error: no examples", line_number=0)
    return examples


# --- benchmark runs -----------------------------------------------------


def _evaluate_row(
    example: QAExample,
    strategy: RetrievalStrategy,
    engine: Engine,
    judge: GenerationClient,
    *,
    generate_answers: bool,
    templates: dict[str, str],
) -> EvalRecord:
    record = EvalRecord(example_id=example.id, strategy=strategy.kind)
    outcome = engine.ask(example.question, strategy, generate=generate_answers)
    record.contexts = outcome.selected

    verdicts = [
        judge_relevance(
            example.question,
            chunk.text,
            judge,
            template=templates.get("judge_relevance"),
            transcripts=record.judge_transcripts,
        )
        for chunk in outcome.selected
    ]
    record.context_precision = context_precision(verdicts)

    statements = split_statements(
        example.reference_answer, judge, template=templates.get("split_statements")
    )
    record.context_recall = context_recall(
        statements,
        [chunk.text for chunk in outcome.selected],
        judge,
        template=templates.get("judge_attribution"),
        transcripts=record.judge_transcripts,
    )

    if generate_answers:
        record.generated_answer = outcome.answer.text
        precision, recall, f1 = token_f1(outcome.answer.text, example.reference_answer)
        record.answer_precision = precision
        record.answer_recall = recall
        record.answer_f1 = f1
    return record


_MEAN_FIELDS = (
    "context_precision",
    "context_recall",
    "answer_precision",
    "answer_recall",
    "answer_f1",
)


def run_benchmark(
    dataset: Sequence[QAExample],
    strategies: Sequence[RetrievalStrategy],
    engine: Engine,
    judge: GenerationClient | None = None,
    *,
    generate_answers: bool = True,
    records_path: Path | str | None = None,
    templates: dict[str, str] | None = None,
) -> tuple[MetricReport, list[EvalRecord]]:
    """Evaluate every (example, strategy) pair and aggregate per strategy.

    Rows run in dataset order with strategies nested inside, and the JSONL
    record stream is written in that order, so runs with deterministic
    gateways are byte-reproducible. A failed row is recorded with its error
    and skipped in aggregation; if more than half of all rows fail the run
    raises ``BenchmarkDegradedError`` (report and records attached).
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    if not strategies:
        raise ValueError("strategies must be non-empty")
    if len({s.pool_size for s in strategies}) > 1:
        raise ValueError("strategies must share pool_size for a fair comparison")
    judge = judge if judge is not None else engine.gateway.judge
    templates = templates or {}

    records: list[EvalRecord] = []
    for example in dataset:
        for strategy in strategies:
            try:
                record = _evaluate_row(
                    example,
                    strategy,
                    engine,
                    judge,
                    generate_answers=generate_answers,
                    templates=templates,
                )
            except QaRagError as exc:
                log.warning("row (%s, %s) failed: %s", example.id, strategy.kind, exc)
                record = EvalRecord(
                    example_id=example.id, strategy=strategy.kind, error=str(exc)
                )
            records.append(record)

    if records_path is not None:
        with open(records_path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.to_row(), sort_keys=True) + "\n")

    strategy_stats: dict[str, dict[str, float]] = {}
    for strategy in strategies:
        rows = [r for r in records if r.strategy == strategy.kind and r.error is None]
        stats: dict[str, float] = {"examples": len(rows)}
        for name in _MEAN_FIELDS:
            values = [getattr(r, name) for r in rows if getattr(r, name) is not None]
            if values:
                stats[name] = sum(values) / len(values)
        strategy_stats[strategy.kind] = stats

    failed = sum(1 for r in records if r.error is not None)
    report = MetricReport(
        strategies=strategy_stats,
        example_count=len(dataset),
        failed_rows=failed,
        config={
            "strategies": [
                {
                    "kind": s.kind,
                    "pool_size": s.pool_size,
                    "question_share": s.question_share,
                    "extra_queries": s.extra_queries,
                }
                for s in strategies
            ],
            "top_n": engine.selection.top_n,
            "scorer": engine.scorer,
            "generate_answers": generate_answers,
        },
    )
    if failed * 2 > len(records):
        raise BenchmarkDegradedError(
            f"benchmark degraded: {failed}/{len(records)} rows failed",
            report=report,
            records=records,
        )
    return report, records


def render_report_table(report: MetricReport) -> str:
    """Aligned text table of per-strategy metric means."""
    columns = ["strategy"] + list(_MEAN_FIELDS) + ["examples"]
    rows = [columns]
    for kind, stats in report.strategies.items():
        row = [kind]
        for name in _MEAN_FIELDS:
            row.append(f"{stats[name]:.3f}" if name in stats else "-")
        row.append(str(int(stats.get("examples", 0))))
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(columns))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)

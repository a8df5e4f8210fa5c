"""Synthetic planted-relevance corpus for offline benchmark runs.

Generates guideline-style documents where each benchmark question has
exactly one relevant document sharing a unique marker token, plus
distractor documents with disjoint vocabulary. A keyword-configured mock
generator is given the relevant document's text verbatim as its canned
answer, simulating a domain-tuned model that emits the vocabulary of the
right source: the answer track then retrieves the planted document with
similarity 1.0 under the hash-based mock embedder, while question-only
retrieval has no such signal. This reproduces, at desk scale, the
qualitative ranking between answer-based and question-only strategies.

Everything here is deterministic given the seed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Sequence

from .evaluation import QAExample
from .gateway import ChatMessage
from .mocks import FunctionGenerator

MARKER_RE = re.compile(r"topic\d{2}")

_FILLER_WORDS = (
    "storage", "labeling", "sampling", "retention", "audits", "training",
    "equipment", "calibration", "batches", "deviations", "hygiene", "records",
)


@dataclass
class SyntheticCorpus:
    """Planted documents, their benchmark dataset, and the canned answers."""

    planted_docs: list[tuple[str, str]]  # (filename, text), one per QA pair
    distractor_docs: list[tuple[str, str]]
    dataset: list[QAExample]
    tuned_replies: dict[str, str]  # marker keyword -> relevant document text

    @property
    def documents(self) -> list[tuple[str, str]]:
        return self.planted_docs + self.distractor_docs

    def write_files(self, directory: Path | str) -> Path:
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        for name, text in self.documents:
            (root / name).write_text(text, encoding="utf-8")
        return root

    def write_dataset(self, path: Path | str) -> Path:
        import json

        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            for example in self.dataset:
                fh.write(
                    json.dumps(
                        {
                            "id": example.id,
                            "question": example.question,
                            "answer": example.reference_answer,
                        }
                    )
                    + "\n"
                )
        return path


def generate_synthetic_corpus(
    n_pairs: int = 20,
    n_distractors: int = 20,
    *,
    seed: int = 0,
) -> SyntheticCorpus:
    """Build ``n_pairs`` planted question/document pairs plus distractors.

    Every planted document shares the tokens {guideline, require, for,
    submission} with its question plus a unique ``topicNN`` marker, so a
    token-overlap reranker strictly prefers the planted document over other
    planted documents, and a marker-matching judge deems only the planted
    document relevant.
    """
    if not 1 <= n_pairs <= 100:
        raise ValueError("n_pairs must be in [1, 100]")
    rng = Random(seed)

    planted: list[tuple[str, str]] = []
    dataset: list[QAExample] = []
    replies: dict[str, str] = {}
    for i in range(n_pairs):
        marker = f"topic{i:02d}"
        extra = " ".join(rng.sample(_FILLER_WORDS, k=rng.randint(2, 5)))
        doc_text = (
            f"Guideline {marker} addresses submission readiness. Sponsors must "
            f"require complete validation records for each {marker} process, and "
            f"submission packages referencing guideline {marker} shall also cover "
            f"{extra}."
        )
        question = f"what does guideline {marker} require for submission"
        reference = (
            f"Guideline {marker} mandates validated records before submission. "
            f"Every {marker} package must include them."
        )
        planted.append((f"planted_{marker}.txt", doc_text))
        dataset.append(QAExample(id=f"q-{marker}", question=question, reference_answer=reference))
        replies[marker] = doc_text

    distractors: list[tuple[str, str]] = []
    for j in range(n_distractors):
        filler = f"memo{j:02d}"
        extra = " ".join(rng.sample(_FILLER_WORDS, k=rng.randint(3, 6)))
        text = (
            f"Internal note {filler} covers cafeteria rotations, parking "
            f"assignments, plus {extra} under facilities management."
        )
        distractors.append((f"distractor_{filler}.txt", text))

    return SyntheticCorpus(
        planted_docs=planted,
        distractor_docs=distractors,
        dataset=dataset,
        tuned_replies=replies,
    )


# --- deterministic mock agents for the offline benchmark ---------------------


def variant_expander() -> FunctionGenerator:
    """Expansion mock returning three numbered rephrasings of the question."""

    def expand(messages: Sequence[ChatMessage]) -> str:
        prompt = messages[-1].content
        question = prompt.rpartition("Question:")[2].strip() or "the question"
        return "\n".join(
            f"{i}. {question} from angle {word}"
            for i, word in enumerate(("scope", "process", "evidence"), 1)
        )

    return FunctionGenerator(expand)


def marker_judge() -> FunctionGenerator:
    """Judge mock keyed to the default judge/statement prompt templates.

    Relevance and attribution verdicts are "yes" exactly when the probe
    (question or statement) and the evidence block share a ``topicNN``
    marker. Statement-split requests are answered with a numbered
    sentence split.
    """

    def judge(messages: Sequence[ChatMessage]) -> str:
        prompt = messages[-1].content
        if "atomic factual statements" in prompt:
            answer = prompt.rpartition("Answer:")[2].strip()
            sentences = [s for s in re.split(r"(?<=[.!?])\s+", answer) if s]
            return "\n".join(f"{i}. {s}" for i, s in enumerate(sentences, 1))

        head, sep, evidence = prompt.partition("Excerpt")
        if not sep:
            return "no"
        probe_markers = set(MARKER_RE.findall(head))
        evidence_markers = set(MARKER_RE.findall(evidence))
        return "yes" if probe_markers & evidence_markers else "no"

    return FunctionGenerator(judge)

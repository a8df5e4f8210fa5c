"""Final answer generation with few-shot prompting.

The prompt layout is: one system message, then each few-shot example as a
user/assistant pair, then a final user message carrying the numbered,
id-labeled contexts and the question. Templates are plain text where an
optional line containing only ``---`` separates the system text from the
user-message template; the user part must contain ``{contexts}`` and
``{question}`` placeholders.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .errors import AnswerGenerationError, QaRagError, TemplateError
from .gateway import ChatMessage, GenerationClient
from .prompts import load_template
from .rerank import ScoredChunk

DEFAULT_SYSTEM = "You are a helpful assistant answering from the provided excerpts."

_TEMPLATE_SEPARATOR = "---"


@dataclass(frozen=True)
class FewShotExample:
    question: str
    answer: str

    def __post_init__(self):
        if not self.question or not self.answer:
            raise ValueError("few-shot question and answer must be non-empty")


@dataclass
class AnswerConfig:
    """Template and examples for the final answer agent."""

    template: str | None = None
    examples: list[FewShotExample] = field(default_factory=list)

    def resolved_template(self) -> str:
        return self.template if self.template is not None else load_template("final_answer")


@dataclass
class FinalAnswer:
    text: str
    contexts: list[ScoredChunk]
    question: str
    strategy: str
    timings_ms: dict[str, float] = field(default_factory=dict)


def _split_template(template: str) -> tuple[str, str]:
    lines = template.splitlines()
    for i, line in enumerate(lines):
        if line.strip() == _TEMPLATE_SEPARATOR:
            return "\n".join(lines[:i]).strip(), "\n".join(lines[i + 1 :]).strip()
    return DEFAULT_SYSTEM, template.strip()


def format_context_block(i: int, chunk: ScoredChunk) -> str:
    return f"[{i}] doc={chunk.doc_id} chunk={chunk.chunk_index}\n{chunk.text}"


def build_prompt(
    question: str,
    contexts: list[ScoredChunk],
    examples: list[FewShotExample],
    template: str,
) -> list[ChatMessage]:
    """Assemble the final-answer chat messages.

    Few-shot examples precede the question; each selected context appears
    exactly once, numbered and labeled with its doc id and chunk index so
    answers can cite sources.
    """
    if not contexts:
        raise ValueError("contexts must be non-empty")
    system_text, user_template = _split_template(template)
    if "{contexts}" not in user_template or "{question}" not in user_template:
        raise TemplateError(
            "template error: user part must contain {contexts} and {question} placeholders"
        )
    rendered = "\n\n".join(
        format_context_block(i, chunk) for i, chunk in enumerate(contexts, 1)
    )
    messages = [ChatMessage("system", system_text)]
    for example in examples:
        messages.append(ChatMessage("user", example.question))
        messages.append(ChatMessage("assistant", example.answer))
    messages.append(
        ChatMessage("user", user_template.format(contexts=rendered, question=question))
    )
    return messages


def generate_final_answer(
    question: str,
    contexts: list[ScoredChunk],
    client: GenerationClient,
    config: AnswerConfig,
    *,
    strategy: str = "dual_track",
    timings_ms: dict[str, float] | None = None,
) -> FinalAnswer:
    """Run one generation call over the built prompt.

    ``timings_ms`` carries durations from earlier pipeline stages; the
    generation duration is added under ``"generate"``. On failure the
    selected contexts ride along on the raised error for display.
    """
    messages = build_prompt(question, contexts, config.examples, config.resolved_template())
    timings = dict(timings_ms or {})
    started = time.perf_counter()
    try:
        text = client.generate(messages)
    except QaRagError as exc:
        raise AnswerGenerationError(
            f"answer generation failed: {exc}", contexts=contexts
        ) from exc
    timings["generate"] = (time.perf_counter() - started) * 1000.0
    return FinalAnswer(
        text=text,
        contexts=list(contexts),
        question=question,
        strategy=strategy,
        timings_ms=timings,
    )

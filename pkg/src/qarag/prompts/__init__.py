"""Versioned prompt templates shipped with the package.

Templates are plain UTF-8 text files with ``str.format`` placeholders.
``load_template(name)`` returns the file content; callers may substitute
their own template strings anywhere one is accepted.
"""

from __future__ import annotations

import json
from importlib import resources

_TEMPLATE_NAMES = (
    "hypothetical_answer",
    "multiquery",
    "multiquery_strict",
    "hyde_passage",
    "final_answer",
    "chunk_score",
    "judge_relevance",
    "judge_attribution",
    "split_statements",
)


def load_template(name: str) -> str:
    if name not in _TEMPLATE_NAMES:
        raise KeyError(f"unknown template {name!r}; known: {_TEMPLATE_NAMES}")
    return resources.files(__package__).joinpath(f"{name}.txt").read_text("utf-8")


def load_default_fewshot() -> list[dict]:
    raw = resources.files(__package__).joinpath("fewshot_default.json").read_text("utf-8")
    return json.loads(raw)

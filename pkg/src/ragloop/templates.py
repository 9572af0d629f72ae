"""Prompt templates: {{slot}} substitution, few-shot blocks, packaged defaults."""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from .errors import TemplateError

TEMPLATE_NAMES = ("curate", "extract_triples", "resolve_placeholders", "final_answer")

_SLOT_RE = re.compile(r"\{\{(\w+)\}\}")

# Generic worked answers rendered into the final-answer prompt.
DEFAULT_FEW_SHOT: tuple[tuple[str, str], ...] = (
    ("Which city is the capital of Australia?",
     "Canberra is the capital city of Australia. So the answer is Canberra."),
    ("Who wrote the novel Moby-Dick?",
     "The novel Moby-Dick was written by Herman Melville. So the answer is Herman Melville."),
    ("What is the chemical symbol for gold?",
     "Gold has the chemical symbol Au. So the answer is Au."),
    ("In which year did the Berlin Wall fall?",
     "The Berlin Wall fell in 1989. So the answer is 1989."),
    ("Which planet is known as the Red Planet?",
     "Mars is known as the Red Planet. So the answer is Mars."),
    ("Who painted the Mona Lisa?",
     "The Mona Lisa was painted by Leonardo da Vinci. So the answer is Leonardo da Vinci."),
    ("What is the largest ocean on Earth?",
     "The Pacific Ocean is the largest ocean on Earth. So the answer is the Pacific Ocean."),
    ("Which element has atomic number 1?",
     "Hydrogen has atomic number 1. So the answer is Hydrogen."),
)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    few_shot_examples: tuple[tuple[str, str], ...] = ()


def render_prompt(template: PromptTemplate, slots: Mapping[str, str]) -> str:
    """Substitute every {{slot}} in the body; unknown slots raise TemplateError."""
    def repl(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in slots:
            raise TemplateError(
                f"template {template.name!r} references unbound slot {name!r}"
            )
        return str(slots[name])

    return _SLOT_RE.sub(repl, template.body)


def format_few_shot(examples: tuple[tuple[str, str], ...], n: int) -> str:
    """Render exactly n worked examples as Question/Answer blocks."""
    if n < 0:
        raise ValueError(f"few-shot count must be non-negative, got {n}")
    if n > len(examples):
        raise TemplateError(f"requested {n} few-shot examples, only {len(examples)} available")
    blocks = [f"Question: {q}\nAnswer: {a}" for q, a in examples[:n]]
    return "\n\n".join(blocks)


class TemplateSet:
    """The four pipeline templates, loaded from a directory of editable files."""

    def __init__(self, templates: Mapping[str, PromptTemplate]):
        missing = [name for name in TEMPLATE_NAMES if name not in templates]
        if missing:
            raise TemplateError(f"missing templates: {', '.join(missing)}")
        self._templates = dict(templates)

    def get(self, name: str) -> PromptTemplate:
        try:
            return self._templates[name]
        except KeyError:
            raise TemplateError(f"unknown template {name!r}") from None

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "TemplateSet":
        """Load *.txt template files; None loads the packaged defaults."""
        templates: dict[str, PromptTemplate] = {}
        if directory is None:
            root = resources.files("ragloop").joinpath("templates")
            for name in TEMPLATE_NAMES:
                body = root.joinpath(f"{name}.txt").read_text(encoding="utf-8")
                templates[name] = _build(name, body)
            return cls(templates)
        directory = Path(directory)
        for name in TEMPLATE_NAMES:
            path = directory / f"{name}.txt"
            if not path.is_file():
                raise TemplateError(f"template file not found: {path}")
            templates[name] = _build(name, path.read_text(encoding="utf-8"))
        return cls(templates)


def _build(name: str, body: str) -> PromptTemplate:
    few_shot = DEFAULT_FEW_SHOT if name == "final_answer" else ()
    return PromptTemplate(name=name, body=body, few_shot_examples=few_shot)

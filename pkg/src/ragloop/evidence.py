"""Dynamic evidence pool: LLM-curated facts, deduplicated across iterations."""
from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .errors import CurationFormatError
from .index import RetrievedPassage
from .llm import ChatRequest, DEFAULT_SYSTEM, LlmClient
from .templates import TemplateSet, render_prompt
from .text import contains_tokens, normalize_text, tokenize

# Near-duplicate units are dropped when their 3-token shingle sets overlap
# at or above this Jaccard similarity.
NEAR_DUP_JACCARD = 0.9
_SHINGLE = 3


@dataclass(frozen=True)
class EvidenceUnit:
    id: int
    text: str
    iteration: int
    source_query: str
    source_doc_ids: tuple[str, ...] = ()


def _shingles(tokens: tuple[str, ...]) -> frozenset[tuple[str, ...]]:
    if len(tokens) < _SHINGLE:
        return frozenset({tokens})
    return frozenset(
        tokens[i : i + _SHINGLE] for i in range(len(tokens) - _SHINGLE + 1)
    )


def shingle_jaccard(a: tuple[str, ...], b: tuple[str, ...]) -> float:
    """Jaccard similarity of 3-token shingle sets; short texts use one shingle."""
    sa, sb = _shingles(a), _shingles(b)
    if not sa and not sb:
        return 1.0
    union = len(sa | sb)
    return len(sa & sb) / union if union else 0.0


class EvidencePool:
    """Ordered, deduplicated evidence units accumulated over retrieval rounds."""

    def __init__(self) -> None:
        self.units: list[EvidenceUnit] = []
        self._norm_texts: set[str] = set()
        self._token_seqs: list[tuple[str, ...]] = []

    def __len__(self) -> int:
        return len(self.units)

    def add_units(self, units: list[EvidenceUnit]) -> int:
        """Append units that are neither exact nor near duplicates.

        Returns the number actually appended. Unit ids are reassigned to the
        pool-wide insertion sequence.
        """
        appended = 0
        for unit in units:
            tokens = tuple(tokenize(unit.text))
            norm = " ".join(tokens)
            if not norm or norm in self._norm_texts:
                continue
            if any(shingle_jaccard(tokens, seen) >= NEAR_DUP_JACCARD
                   for seen in self._token_seqs):
                continue
            self.units.append(replace(unit, id=len(self.units)))
            self._norm_texts.add(norm)
            self._token_seqs.append(tokens)
            appended += 1
        return appended

    def occurrence_count(self, entity: str) -> int:
        """Units whose text contains the entity as a token-boundary phrase."""
        needle = tuple(tokenize(entity))
        if not needle:
            return 0
        return sum(1 for seq in self._token_seqs if contains_tokens(seq, needle))

    def render(self) -> str:
        """Single newline-joined block of all unit texts, in insertion order."""
        return "\n".join(unit.text for unit in self.units)

    def snapshot(self) -> list[dict]:
        return [
            {
                "id": u.id,
                "text": u.text,
                "iteration": u.iteration,
                "source_query": u.source_query,
                "source_doc_ids": list(u.source_doc_ids),
            }
            for u in self.units
        ]


def format_passages(passages: list[RetrievedPassage]) -> str:
    return "\n".join(f"[{p.rank}] {p.text}" for p in passages)


def curate(question: str, query: str, passages: list[RetrievedPassage],
           llm: LlmClient, templates: TemplateSet,
           *, iteration: int = 0) -> list[EvidenceUnit]:
    """Ask the LLM to distill passages into one-fact-per-line evidence units.

    Returns [] for empty passage lists or an explicit NONE reply. A blank
    response is a format error; duplicates are collapsed later by the pool.
    """
    if not passages:
        return []
    prompt = render_prompt(templates.get("curate"), {
        "question": question,
        "passages": format_passages(passages),
    })
    response = llm.complete(ChatRequest("curate", DEFAULT_SYSTEM, prompt))
    raw = response.text
    if not raw.strip():
        raise CurationFormatError(raw)
    if raw.strip().upper() == "NONE":
        return []
    doc_ids = tuple(p.doc_id for p in passages)
    units = []
    for line in raw.splitlines():
        line = re.sub(r"^\s*(?:[-*•]+|\d+[.)])\s*", "", line).strip()
        if line:
            units.append(EvidenceUnit(0, line, iteration, query, doc_ids))
    if not units:
        raise CurationFormatError(raw)
    return units

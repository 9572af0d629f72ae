"""Entity-coverage gap analysis and follow-up query synthesis.

The question is analyzed once into key entities plus relational triples whose
unknown slots carry the <X> placeholder. Each retrieval round then measures
how well the evidence pool covers the entities, collects under-covered ones
as gaps, asks the LLM to ground placeholders against the pool, and joins the
results into the next search query.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import DegenerateAnalysisError, ExtractionFormatError
from .evidence import EvidencePool
from .llm import ChatRequest, DEFAULT_SYSTEM, LlmClient, first_json_block
from .templates import TemplateSet, render_prompt
from .text import normalize_text

PLACEHOLDER = "<X>"
QUERY_TOKEN_LIMIT = 16


@dataclass(frozen=True)
class RelationTriple:
    subject: str
    predicate: str
    object: str

    @property
    def has_placeholder(self) -> bool:
        return PLACEHOLDER in (self.subject, self.object)

    def as_text(self) -> str:
        return f"({self.subject}, {self.predicate}, {self.object})"


@dataclass(frozen=True)
class QuestionAnalysis:
    entities: tuple[str, ...]
    triples: tuple[RelationTriple, ...]


@dataclass(frozen=True)
class CoverageReport:
    per_entity: Mapping[str, float]
    threshold: float

    def lowest_entity(self) -> str:
        """Entity with minimal coverage; ties keep analysis order."""
        return min(self.per_entity, key=lambda e: self.per_entity[e])


@dataclass(frozen=True)
class GapList:
    entity_gaps: tuple[str, ...]
    resolutions: tuple[str, ...]

    @property
    def empty(self) -> bool:
        return not self.entity_gaps and not self.resolutions


def analyze_question(question: str, llm: LlmClient,
                     templates: TemplateSet) -> QuestionAnalysis:
    """Extract key entities and placeholder triples from the question.

    Entity duplicates are collapsed on normalized text, keeping first
    occurrence order. An empty entity list is a degenerate analysis.
    """
    prompt = render_prompt(templates.get("extract_triples"), {"question": question})
    response = llm.complete(ChatRequest("extract_triples", DEFAULT_SYSTEM, prompt))
    try:
        data = first_json_block(response.text)
    except ValueError as exc:
        raise ExtractionFormatError(response.text, str(exc)) from exc
    if not isinstance(data, dict):
        raise ExtractionFormatError(response.text, "top level is not an object")

    raw_entities = data.get("entities")
    if not isinstance(raw_entities, list):
        raise ExtractionFormatError(response.text, "missing entities list")
    entities: list[str] = []
    seen: set[str] = set()
    for item in raw_entities:
        if not isinstance(item, str) or not item.strip():
            raise ExtractionFormatError(response.text, f"bad entity {item!r}")
        norm = normalize_text(item)
        if norm and norm not in seen:
            seen.add(norm)
            entities.append(item.strip())

    raw_triples = data.get("triples", [])
    if not isinstance(raw_triples, list):
        raise ExtractionFormatError(response.text, "triples is not a list")
    triples: list[RelationTriple] = []
    for item in raw_triples:
        if (not isinstance(item, list) or len(item) != 3
                or not all(isinstance(part, str) for part in item)):
            raise ExtractionFormatError(response.text, f"bad triple {item!r}")
        if not item[1].strip():
            raise ExtractionFormatError(response.text, f"empty predicate in {item!r}")
        triples.append(RelationTriple(*[part.strip() for part in item]))

    if not entities:
        raise DegenerateAnalysisError(f"no entities extracted from {question!r}")
    return QuestionAnalysis(tuple(entities), tuple(triples))


def entity_coverage(pool: EvidencePool, entity: str) -> float:
    """Fraction of pool units mentioning the entity, capped at 1.0.

    An empty pool covers nothing and scores 0.0.
    """
    if not entity.strip():
        raise ValueError("entity must be non-empty")
    if len(pool) == 0:
        return 0.0
    return min(pool.occurrence_count(entity) / len(pool), 1.0)


def coverage_report(analysis: QuestionAnalysis, pool: EvidencePool,
                    threshold: float) -> CoverageReport:
    _check_threshold(threshold)
    per_entity = {e: entity_coverage(pool, e) for e in analysis.entities}
    return CoverageReport(per_entity, threshold)


def update_gaps(analysis: QuestionAnalysis, pool: EvidencePool,
                threshold: float) -> tuple[str, ...]:
    """Entities whose coverage falls strictly below the threshold."""
    report = coverage_report(analysis, pool, threshold)
    return tuple(e for e in analysis.entities if report.per_entity[e] < threshold)


def resolve_placeholders(triples: tuple[RelationTriple, ...], pool: EvidencePool,
                         llm: LlmClient, templates: TemplateSet,
                         known: Iterable[str] = ()) -> tuple[str, ...]:
    """Ground <X> slots against the pool, returning new entity strings.

    Skips the LLM call entirely when the pool is empty or no triple carries a
    placeholder. Values whose normalized form appears in `known` (or earlier
    in the same reply) are dropped as duplicates.
    """
    if len(pool) == 0 or not any(t.has_placeholder for t in triples):
        return ()
    prompt = render_prompt(templates.get("resolve_placeholders"), {
        "triples": "\n".join(t.as_text() for t in triples),
        "evidence": pool.render(),
    })
    response = llm.complete(ChatRequest("resolve_placeholders", DEFAULT_SYSTEM, prompt))
    try:
        data = first_json_block(response.text)
    except ValueError as exc:
        raise ExtractionFormatError(response.text, str(exc)) from exc
    values = data.get("resolutions") if isinstance(data, dict) else data
    if not isinstance(values, list):
        raise ExtractionFormatError(response.text, "missing resolutions list")

    known_norms = {normalize_text(k) for k in known}
    out: list[str] = []
    for value in values:
        if not isinstance(value, str):
            raise ExtractionFormatError(response.text, f"bad resolution {value!r}")
        value = value.strip()
        norm = normalize_text(value)
        if not norm or value == PLACEHOLDER or norm in known_norms:
            continue
        known_norms.add(norm)
        out.append(value)
    return tuple(out)


def synthesize_query(gaps: GapList, limit: int = QUERY_TOKEN_LIMIT) -> str:
    """Join resolutions then entity gaps, truncated to `limit` lexical items."""
    if gaps.empty:
        raise ValueError("cannot synthesize a query from an empty gap list")
    words: list[str] = []
    for item in (*gaps.resolutions, *gaps.entity_gaps):
        words.extend(item.split())
    return " ".join(words[:limit])


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"coverage threshold must lie in (0, 1), got {threshold}")

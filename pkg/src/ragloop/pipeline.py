"""Question-answering pipeline with four retrieval modes.

Modes:
  none     direct generation, no retrieval.
  vanilla  one retrieval round with the original question, then generation.
  fixed    exactly max_iterations rounds; follow-up queries come from gap
           analysis but no sufficiency check runs.
  rfm      retrieval-feedback mode: after each round the feedback net decides
           from (syntactic, semantic) features whether the pool suffices;
           otherwise gap analysis synthesizes the next query.

Every round retrieves, curates the passages into the evidence pool, and is
recorded as an IterationTrace. The question analysis runs once per question
and is reused across rounds. If analysis is degenerate (no entities), follow
up queries fall back to the original question and the feedback gate is
bypassed, so the round budget is always spent.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DegenerateAnalysisError, RagLoopError
from .evidence import EvidencePool, curate
from .feedback import (FeatureVector, FeedbackDecision, FeedbackNet,
                       semantic_feature, syntactic_feature)
from .gaps import (GapList, QuestionAnalysis, analyze_question, coverage_report,
                   resolve_placeholders, synthesize_query, update_gaps)
from .index import Bm25Index
from .llm import ChatRequest, DEFAULT_SYSTEM, LlmClient
from .scorers import RelevanceScorer
from .templates import TemplateSet, format_few_shot, render_prompt

MODES = ("none", "vanilla", "fixed", "rfm")

_ANSWER_MARKER = re.compile(r"answer\s+is\b[:\s]*|answer\s*:\s*", re.IGNORECASE)
_TRAILING_PUNCT = " \t\n.,;:!?"


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "rfm"
    max_iterations: int = 3
    top_k: int = 5
    coverage_threshold: float = 0.1
    tau: float = 0.5
    few_shot: int = 4

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if not 0.0 < self.coverage_threshold < 1.0:
            raise ValueError("coverage_threshold must lie in (0, 1)")


@dataclass
class PipelineDeps:
    templates: TemplateSet
    curator: LlmClient
    answerer: LlmClient
    index: Bm25Index | None = None
    scorer: RelevanceScorer | None = None
    net: FeedbackNet | None = None


@dataclass
class IterationTrace:
    iteration: int
    query: str
    retrieved: list[tuple[str, float]]
    evidence_added: int
    features: FeatureVector | None = None
    decision: FeedbackDecision | None = None
    gaps: GapList | None = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "query": self.query,
            "retrieved": [[doc_id, score] for doc_id, score in self.retrieved],
            "evidence_added": self.evidence_added,
            "features": None if self.features is None else {
                "syntactic": self.features.syntactic,
                "semantic": self.features.semantic,
            },
            "decision": None if self.decision is None else {
                "logit": self.decision.logit,
                "probability": self.decision.probability,
                "sufficient": self.decision.sufficient,
            },
            "gaps": None if self.gaps is None else {
                "entity_gaps": list(self.gaps.entity_gaps),
                "resolutions": list(self.gaps.resolutions),
            },
        }


@dataclass
class RunResult:
    question: str
    mode: str
    raw_answer: str
    extracted_answer: str
    traces: list[IterationTrace] = field(default_factory=list)
    error: str | None = None

    @property
    def r_step(self) -> int:
        return len(self.traces)

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "mode": self.mode,
            "raw_answer": self.raw_answer,
            "extracted_answer": self.extracted_answer,
            "r_step": self.r_step,
            "error": self.error,
            "traces": [t.to_dict() for t in self.traces],
        }


def extract_answer(raw: str) -> str:
    """Text after the last "answer is"/"Answer:" marker, or the last line.

    Trailing punctuation is trimmed. An empty raw answer yields "".
    """
    if not raw.strip():
        return ""
    last = None
    for match in _ANSWER_MARKER.finditer(raw):
        last = match
    candidate = raw[last.end():].strip() if last else ""
    if not candidate:
        lines = [line.strip() for line in raw.splitlines() if line.strip()]
        candidate = lines[-1]
    return candidate.rstrip(_TRAILING_PUNCT)


def generate_answer(question: str, pool: EvidencePool, llm: LlmClient,
                    templates: TemplateSet, few_shot: int) -> str:
    """One final-answer completion over the rendered pool with worked examples."""
    template = templates.get("final_answer")
    prompt = render_prompt(template, {
        "examples": format_few_shot(template.few_shot_examples, few_shot),
        "evidence": pool.render(),
        "question": question,
    })
    return llm.complete(ChatRequest("final_answer", DEFAULT_SYSTEM, prompt)).text


def run_question(question: str, deps: PipelineDeps,
                 config: PipelineConfig) -> RunResult:
    """Run one question through the configured mode.

    Dependency failures (transport, transcript misses, format errors) abort
    the question and surface as an error result carrying partial traces.
    """
    _check_deps(deps, config)
    traces: list[IterationTrace] = []
    try:
        raw = _run(question, deps, config, traces)
    except RagLoopError as exc:
        return RunResult(question, config.mode, "", "", traces,
                         error=f"{type(exc).__name__}: {exc}")
    return RunResult(question, config.mode, raw, extract_answer(raw), traces)


def _check_deps(deps: PipelineDeps, config: PipelineConfig) -> None:
    if config.mode != "none" and deps.index is None:
        raise ValueError(f"mode {config.mode!r} requires a retrieval index")
    if config.mode == "rfm":
        if deps.net is None:
            raise ValueError("mode 'rfm' requires a feedback net")
        if deps.scorer is None:
            raise ValueError("mode 'rfm' requires a relevance scorer")


def _run(question: str, deps: PipelineDeps, config: PipelineConfig,
         traces: list[IterationTrace]) -> str:
    pool = EvidencePool()
    if config.mode == "none":
        return generate_answer(question, pool, deps.answerer, deps.templates,
                               config.few_shot)

    budget = 1 if config.mode == "vanilla" else config.max_iterations
    analysis: QuestionAnalysis | None = None
    degenerate = False
    prior_resolutions: list[str] = []
    query = question

    for iteration in range(budget):
        passages = deps.index.retrieve(query, config.top_k)
        units = curate(question, query, passages, deps.curator, deps.templates,
                       iteration=iteration)
        added = pool.add_units(units)
        trace = IterationTrace(iteration, query,
                               [(p.doc_id, p.score) for p in passages], added)
        traces.append(trace)

        if config.mode == "rfm" and not degenerate:
            if analysis is None:
                analysis, degenerate = _analyze(question, deps)
            if not degenerate:
                features = FeatureVector(
                    syntactic_feature(analysis, pool),
                    semantic_feature(deps.scorer, question, pool),
                )
                trace.features = features
                decision = deps.net.decide(features)
                trace.decision = decision
                if decision.sufficient:
                    break
        if iteration == budget - 1:
            break

        if analysis is None and not degenerate:
            analysis, degenerate = _analyze(question, deps)
        if degenerate:
            continue
        gaps = GapList(
            update_gaps(analysis, pool, config.coverage_threshold),
            resolve_placeholders(analysis.triples, pool, deps.curator,
                                 deps.templates,
                                 known=(*analysis.entities, *prior_resolutions)),
        )
        trace.gaps = gaps
        prior_resolutions.extend(gaps.resolutions)
        if gaps.empty:
            report = coverage_report(analysis, pool, config.coverage_threshold)
            query = f"{question} {report.lowest_entity()}"
        else:
            query = synthesize_query(gaps)

    return generate_answer(question, pool, deps.answerer, deps.templates,
                           config.few_shot)


def _analyze(question: str, deps: PipelineDeps
             ) -> tuple[QuestionAnalysis | None, bool]:
    try:
        return analyze_question(question, deps.curator, deps.templates), False
    except DegenerateAnalysisError:
        return None, True


def write_trace(result: RunResult, path: str | Path) -> None:
    """Serialize a run result as stable, reproducible JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")

"""Training data for the sufficiency gate: generation, IO, and featurization.

From gold QA records carrying supporting and irrelevant sentences, examples
are emitted in pairs to keep labels balanced: one sufficient context (all
supports, label 1) and one negative drawn from the insufficient pattern
(distractors only) or the partial pattern (strict subset of supports plus
distractors), both label 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .feedback import (FeatureVector, FeedbackNet, TrainConfig, TrainReport,
                       train_on_features)
from .scorers import RelevanceScorer
from .text import content_tokens, split_sentences, tokenize

CATEGORY_SUFFICIENT = "sufficient"
CATEGORY_INSUFFICIENT = "insufficient"
CATEGORY_PARTIAL = "partial"


@dataclass(frozen=True)
class TrainingExample:
    question: str
    context: str
    label: int


@dataclass(frozen=True)
class GoldRecord:
    id: str
    question: str
    supports: tuple[str, ...]
    distractors: tuple[str, ...]


@dataclass
class GenerationReport:
    n_examples: int = 0
    n_positive: int = 0
    n_skipped: int = 0
    category_counts: dict[str, int] = field(default_factory=dict)


def load_gold(path: str | Path) -> list[GoldRecord]:
    """Read gold records from JSONL: {"id", "question", "supports", "distractors"}."""
    records: list[GoldRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: malformed JSON ({exc})") from exc
            try:
                records.append(GoldRecord(
                    id=str(obj["id"]),
                    question=str(obj["question"]),
                    supports=tuple(obj.get("supports", ())),
                    distractors=tuple(obj.get("distractors", ())),
                ))
            except (KeyError, TypeError) as exc:
                raise DataError(f"line {lineno}: bad gold record ({exc})") from exc
    return records


def generate_training_data(gold: list[GoldRecord], count: int, seed: int
                           ) -> tuple[list[TrainingExample], GenerationReport]:
    """Emit `count` examples by cycling usable records in positive/negative pairs.

    Records without at least one support and one distractor are skipped and
    counted. Output is byte-identical for a fixed seed. Records with a single
    support cannot form a strict-subset partial context and fall back to the
    insufficient pattern for their negative.
    """
    if count < 1:
        raise DataError(f"count must be positive, got {count}")
    report = GenerationReport(category_counts={
        CATEGORY_SUFFICIENT: 0, CATEGORY_INSUFFICIENT: 0, CATEGORY_PARTIAL: 0,
    })
    usable = [r for r in gold if r.supports and r.distractors]
    report.n_skipped = len(gold) - len(usable)
    if not usable:
        raise DataError("no gold record has both supports and distractors")

    rng = np.random.default_rng(seed)
    examples: list[TrainingExample] = []
    record_i = 0
    while len(examples) < count:
        record = usable[record_i % len(usable)]
        record_i += 1

        examples.append(TrainingExample(record.question, " ".join(record.supports), 1))
        report.category_counts[CATEGORY_SUFFICIENT] += 1
        if len(examples) >= count:
            break

        if len(record.supports) >= 2 and rng.integers(2) == 1:
            k = int(rng.integers(1, len(record.supports)))
            picked = sorted(rng.choice(len(record.supports), size=k, replace=False))
            parts = [record.supports[i] for i in picked] + list(record.distractors)
            examples.append(TrainingExample(record.question, " ".join(parts), 0))
            report.category_counts[CATEGORY_PARTIAL] += 1
        else:
            examples.append(TrainingExample(record.question,
                                            " ".join(record.distractors), 0))
            report.category_counts[CATEGORY_INSUFFICIENT] += 1

    report.n_examples = len(examples)
    report.n_positive = sum(e.label for e in examples)
    return examples, report


def save_examples(examples: list[TrainingExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(
                {"question": ex.question, "context": ex.context, "label": ex.label},
                ensure_ascii=False,
            ) + "\n")


def load_examples(path: str | Path) -> list[TrainingExample]:
    examples: list[TrainingExample] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                label = int(obj["label"])
                if label not in (0, 1):
                    raise ValueError(f"label must be 0 or 1, got {label}")
                examples.append(TrainingExample(str(obj["question"]),
                                                str(obj["context"]), label))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise DataError(f"line {lineno}: bad training example ({exc})") from exc
            if not examples[-1].context:
                raise DataError(f"line {lineno}: empty context")
    return examples


def features_for_example(question: str, context: str,
                         scorer: RelevanceScorer) -> FeatureVector:
    """Features for a bare (question, context) pair, with no LLM in the loop.

    Question entities are approximated by its content tokens and coverage is
    measured over the context's sentences; the semantic side is the scorer
    applied to the full context.
    """
    sentences = [tuple(tokenize(s)) for s in split_sentences(context)]
    sentences = [s for s in sentences if s]
    entities = content_tokens(question)
    if not entities or not sentences:
        syntactic = 0.0
    else:
        covered = [
            sum(1 for s in sentences if tok in s) / len(sentences)
            for tok in entities
        ]
        syntactic = min(sum(covered) / len(covered), 1.0)
    semantic = scorer.score(question, context) if context.strip() else 0.0
    return FeatureVector(syntactic, semantic)


def train_on_examples(net: FeedbackNet, examples: list[TrainingExample],
                      scorer: RelevanceScorer, cfg: TrainConfig) -> TrainReport:
    """Featurize (question, context, label) examples and fit the net."""
    if not examples:
        raise DataError("no training examples")
    x = np.array(
        [
            (f.syntactic, f.semantic)
            for f in (features_for_example(e.question, e.context, scorer)
                      for e in examples)
        ],
        dtype=np.float64,
    )
    y = np.array([e.label for e in examples], dtype=np.float64)
    return train_on_features(net, x, y, cfg)

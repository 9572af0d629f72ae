"""Evaluation harness: exact match, containment accuracy, retrieval steps."""
from __future__ import annotations

import csv
import json
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, RagLoopError
from .pipeline import PipelineConfig, PipelineDeps, RunResult, run_question, write_trace

_ARTICLES = {"a", "an", "the"}
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class EvalRecord:
    id: str
    question: str
    gold_answers: tuple[str, ...]


@dataclass
class EvalRow:
    record_id: str
    mode: str
    em: int
    acc: int
    r_step: int
    error: str | None = None


@dataclass
class ModeSummary:
    em: float
    acc: float
    avg_r_step: float
    n: int


@dataclass
class EvalReport:
    rows: list[EvalRow]
    summaries: dict[str, ModeSummary]
    config: dict = field(default_factory=dict)
    runs: list[tuple[str, str, RunResult]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "config": self.config,
            "n_questions": len({row.record_id for row in self.rows}),
            "modes": {
                mode: {
                    "em": s.em, "acc": s.acc, "avg_r_step": s.avg_r_step, "n": s.n,
                }
                for mode, s in self.summaries.items()
            },
            "rows": [
                {
                    "id": row.record_id, "mode": row.mode, "em": row.em,
                    "acc": row.acc, "r_step": row.r_step, "error": row.error,
                }
                for row in self.rows
            ],
        }


def load_eval_records(path: str | Path) -> list[EvalRecord]:
    """Read QA records from JSONL: {"id", "question", "answers": [...]}."""
    records: list[EvalRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                answers = tuple(str(a) for a in obj["answers"])
                record = EvalRecord(str(obj["id"]), str(obj["question"]), answers)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"line {lineno}: bad eval record ({exc})") from exc
            if not record.gold_answers or not all(a.strip() for a in record.gold_answers):
                raise DataError(f"line {lineno}: empty gold answers")
            records.append(record)
    return records


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace, drop leading articles."""
    tokens = text.lower().translate(_PUNCT_TABLE).split()
    while tokens and tokens[0] in _ARTICLES:
        tokens.pop(0)
    return " ".join(tokens)


def exact_match(prediction: str, golds: tuple[str, ...]) -> int:
    """1 iff the normalized prediction equals any normalized gold answer."""
    norm = normalize_answer(prediction)
    return int(any(norm == normalize_answer(g) for g in golds))


def accuracy(raw_answer: str, golds: tuple[str, ...]) -> int:
    """1 iff any normalized gold occurs token-contiguously in the raw answer."""
    raw_tokens = normalize_answer(raw_answer).split()
    for gold in golds:
        gold_tokens = normalize_answer(gold).split()
        if not gold_tokens or len(gold_tokens) > len(raw_tokens):
            continue
        for i in range(len(raw_tokens) - len(gold_tokens) + 1):
            if raw_tokens[i : i + len(gold_tokens)] == gold_tokens:
                return 1
    return 0


def evaluate(records: list[EvalRecord], deps: PipelineDeps,
             configs: list[PipelineConfig], parallel: int = 1) -> EvalReport:
    """Run every record under every config and aggregate per-mode means.

    Questions that fail inside the pipeline score EM = ACC = 0 and keep their
    error note and partial retrieval count. Row order is (config, record)
    regardless of parallelism, so reports are reproducible.
    """
    if not records:
        raise DataError("no evaluation records")
    if len({c.mode for c in configs}) != len(configs):
        raise ValueError("duplicate modes in eval configs")
    rows: list[EvalRow] = []
    report = EvalReport(rows, {}, config={
        "modes": [c.mode for c in configs],
        "max_iterations": max(c.max_iterations for c in configs),
        "parallel": parallel,
    })

    for config in configs:
        if parallel > 1:
            with ThreadPoolExecutor(max_workers=parallel) as pool:
                results = list(pool.map(
                    lambda r: _run_safe(r, deps, config), records))
        else:
            results = [_run_safe(r, deps, config) for r in records]
        for record, result in zip(records, results):
            report.runs.append((record.id, config.mode, result))
            if result.error is None:
                rows.append(EvalRow(
                    record.id, config.mode,
                    exact_match(result.extracted_answer, record.gold_answers),
                    accuracy(result.raw_answer, record.gold_answers),
                    result.r_step,
                ))
            else:
                rows.append(EvalRow(record.id, config.mode, 0, 0,
                                    result.r_step, result.error))
        mode_rows = [row for row in rows if row.mode == config.mode]
        n = len(mode_rows)
        report.summaries[config.mode] = ModeSummary(
            em=sum(r.em for r in mode_rows) / n,
            acc=sum(r.acc for r in mode_rows) / n,
            avg_r_step=sum(r.r_step for r in mode_rows) / n,
            n=n,
        )
    return report


def _run_safe(record: EvalRecord, deps: PipelineDeps,
              config: PipelineConfig) -> RunResult:
    try:
        return run_question(record.question, deps, config)
    except RagLoopError as exc:  # belt and braces; run_question already catches
        return RunResult(record.question, config.mode, "", "",
                         error=f"{type(exc).__name__}: {exc}")


def write_report(report: EvalReport, outdir: str | Path,
                 traces: bool = True) -> None:
    """Write report.json, rows.csv, and per-run trace files under outdir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    with open(outdir / "rows.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "mode", "em", "acc", "r_step", "error"])
        for row in report.rows:
            writer.writerow([row.record_id, row.mode, row.em, row.acc,
                             row.r_step, row.error or ""])
    if traces:
        for record_id, mode, result in report.runs:
            safe = "".join(ch if ch.isalnum() or ch in "-_" else "_"
                           for ch in record_id)
            write_trace(result, outdir / "traces" / f"{safe}_{mode}.json")


def format_summary(report: EvalReport) -> str:
    """Fixed-width per-mode summary table."""
    lines = [f"{'mode':<10}{'EM':>8}{'ACC':>8}{'avg R-Step':>12}{'n':>6}"]
    for mode, s in report.summaries.items():
        lines.append(f"{mode:<10}{s.em:>8.4f}{s.acc:>8.4f}{s.avg_r_step:>12.4f}{s.n:>6}")
    return "\n".join(lines)

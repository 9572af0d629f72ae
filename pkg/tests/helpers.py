"""Scripted LLM clients and world builders shared across test modules."""
from __future__ import annotations

from dataclasses import dataclass, field

from ragloop import Document, RecordingClient
from ragloop.llm import ChatRequest, ChatResponse


@dataclass
class ScriptRule:
    """Matches (template, substring) and serves queued responses in order."""
    template: str
    contains: str
    responses: list[str] = field(default_factory=list)


class OracleClient:
    """Deterministic stand-in for a live LLM, driven by first-match rules.

    Used behind a RecordingClient: repeated identical prompts are served from
    the recorded transcript, so each queued response is consumed exactly once
    per distinct prompt.
    """

    def __init__(self, rules: list[ScriptRule]):
        self.rules = rules
        self.seen: list[tuple[str, str]] = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.seen.append((request.template, request.user))
        for rule in self.rules:
            if (rule.template == request.template
                    and rule.contains in request.user and rule.responses):
                return ChatResponse(rule.responses.pop(0))
        raise AssertionError(
            f"no scripted response for template {request.template!r}; "
            f"prompt was:\n{request.user[:400]}"
        )


def recording_over(rules: list[ScriptRule]) -> RecordingClient:
    return RecordingClient(OracleClient(rules))


def extraction_json(entities: list[str], triples: list[list[str]]) -> str:
    import json

    payload = json.dumps({"entities": entities, "triples": triples})
    return f"```json\n{payload}\n```"


def resolution_json(values: list[str]) -> str:
    import json

    payload = json.dumps({"resolutions": values})
    return f"```json\n{payload}\n```"


def keyword_suite_world(n_questions: int = 10):
    """A scripted multi-question world with per-question keyword chains.

    Question j mentions three unique keywords; its three docs each carry one.
    Scripted curation reveals exactly one keyword fact per iteration, so the
    pool grows by one unit per round and gap analysis chains the follow-up
    queries kw-b kw-c, then kw-c.
    """
    docs: list[Document] = []
    rules: list[ScriptRule] = []
    questions: list[str] = []
    for j in range(n_questions):
        kws = [f"kw{j}a", f"kw{j}b", f"kw{j}c"]
        question = f"what links {kws[0]} and {kws[1]} and {kws[2]} in study{j}?"
        questions.append(question)
        for mark, kw in zip("ABC", kws):
            docs.append(Document(
                f"d{j}{mark}", f"doc {j}{mark}",
                f"{kw} appears in source material {mark} of study{j}.",
            ))
        # match on a phrase unique to this question's text: retrieved passages
        # can mention other studies, so doc-side markers would cross-fire
        marker = f"links {kws[0]}"
        rules.append(ScriptRule("extract_triples", marker,
                                [extraction_json(kws, [])]))
        rules.append(ScriptRule("curate", marker, [
            f"{kws[0]} fact zero for study{j}.",
            f"{kws[1]} fact one for study{j}.",
            f"{kws[2]} fact two for study{j}.",
        ]))
        rules.append(ScriptRule("final_answer", marker,
                                [f"So the answer is topic{j}."] * 4))
    return docs, questions, rules


class StepScorer:
    """Relevance scorer scripted by pool size: a fact-count threshold per question.

    Returns 0.9 once the pool holds at least `stop_at[j]` scripted fact lines
    for question j, else 0.2. Pure function of (query, text), so reruns are
    deterministic.
    """

    def __init__(self, stop_at: dict[str, int]):
        self.stop_at = stop_at

    def score(self, query: str, text: str) -> float:
        for marker, threshold in self.stop_at.items():
            if marker in query:
                facts = text.count(" fact ")
                return 0.9 if facts >= threshold else 0.2
        raise AssertionError(f"unscripted scorer query: {query!r}")

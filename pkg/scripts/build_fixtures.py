#!/usr/bin/env python3
"""Rebuild the bundled demo fixtures under fixtures/.

The demo world holds two multi-hop questions over an eight-document corpus.
For each question a scripted LLM stand-in is run through all four pipeline
modes behind a recording client, and the captured prompts/responses become
replay transcripts. Everything written here is deterministic, so reruns are
byte-identical, and the script asserts the behavior the bundled fixtures are
documented to show (answers, retrieval step counts, follow-up queries).
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

from ragloop import (  # noqa: E402
    Bm25Index,
    Document,
    FeedbackNet,
    PipelineConfig,
    PipelineDeps,
    RecordingClient,
    ReplayClient,
    run_question,
    save_corpus,
)
from ragloop.evaluation import evaluate, load_eval_records  # noqa: E402
from ragloop.llm import ChatRequest, ChatResponse, save_transcript  # noqa: E402
from ragloop.scorers import LexicalScorer  # noqa: E402
from ragloop.templates import TemplateSet  # noqa: E402


class QueueClient:
    """Pops scripted responses per template, in call order."""

    def __init__(self, queues: dict[str, list[str]]):
        self.queues = {k: list(v) for k, v in queues.items()}

    def complete(self, request: ChatRequest) -> ChatResponse:
        queue = self.queues.get(request.template)
        if not queue:
            raise AssertionError(
                f"script exhausted for template {request.template!r}")
        return ChatResponse(queue.pop(0))


def fenced(payload: dict | list) -> str:
    return f"```json\n{json.dumps(payload, ensure_ascii=False)}\n```"


DOCS = [
    Document("c1d1", "Polish-Russian War (film)",
             "Polish-Russian War (Wojna polsko-ruska) is a 2009 Polish film "
             "directed by Xawery Żuławski. It is based on the novel by Dorota "
             "Masłowska."),
    Document("c1d2", "Xawery Żuławski",
             "Xawery Żuławski (born 22 December 1971 in Warsaw) is a Polish "
             "film director. He is the son of actress Małgorzata Braunek and "
             "director Andrzej Żuławski."),
    Document("c1d3", "Wojna polsko-ruska (novel)",
             "Wojna polsko-ruska pod flagą biało-czerwoną is a 2002 novel by "
             "the Polish writer Dorota Masłowska."),
    Document("c1d4", "Andrzej Żuławski",
             "Andrzej Żuławski was a Polish film director and writer known "
             "for his art-house films."),
    Document("c2d1", "RCA Victor",
             "RCA Victor was an American record company. Berliner's successor "
             "the Victor Talking Machine Co. (later known as RCA Victor) used "
             "a dog-and-gramophone trademark."),
    Document("c2d2", "Nipper",
             "Nipper (1884 - 1895) was a dog who served as the model for a "
             "painting by Francis Barraud. This image was the basis for the "
             "dog-and-gramophone trademark used by Berliner Gramophone and "
             "its successors."),
    Document("c2d3", "Emile Berliner",
             "Emile Berliner was the inventor of the gramophone record."),
    Document("c2d4", "Victor Talking Machine Company",
             "The Victor Talking Machine Company made phonographs in Camden, "
             "New Jersey."),
]

CASE1 = {
    "id": "demo-director-mother",
    "question": "Who is the mother of the director of film Polish-Russian War (Film)?",
    "gold": "Małgorzata Braunek",
    "analysis": fenced({
        "entities": ["Polish-Russian War"],
        "triples": [["Polish-Russian War", "director", "<X>"],
                    ["<X>", "mother", "end"]],
    }),
    "curate": [
        'The director of the film "Polish-Russian War" is Xawery Żuławski.',
        "Małgorzata Braunek is the mother of Xawery Żuławski, the Polish film director.",
        "The film Polish-Russian War was released in 2009.",
    ],
    "resolve": fenced({"resolutions": ["Xawery Żuławski"]}),
    "final": "Małgorzata Braunek is the mother of the director Xawery Żuławski. "
             "So the answer is Małgorzata Braunek.",
    "followup_query": "Xawery Żuławski",
    "rfm_added": [1, 1],
    "fixed_added": [1, 1, 1],
}

CASE2 = {
    "id": "demo-trademark-dog",
    "question": "What is the name of the dog pictured in the trademark of RCA Victor?",
    "gold": "Nipper",
    "analysis": fenced({
        "entities": ["RCA Victor"],
        "triples": [["RCA Victor", "dog", "<X>"]],
    }),
    "curate": [
        "Berliner's successor the Victor Talking Machine Co. (later known as "
        "RCA Victor) used the dog-and-gramophone trademark.",
        "Nipper (1884 - 1895) was a dog who served as the model for a painting.\n"
        "This image was the basis for the dog-and-gramophone trademark that was "
        "used by Berliner's successor the Victor Talking Machine Co. (later "
        "known as RCA Victor).",
        "The Victor Talking Machine Company made phonographs in Camden New Jersey.",
    ],
    "resolve": fenced({"resolutions": ["Berliner"]}),
    "final": "The dog on the trademark is Nipper. So the answer is Nipper.",
    "followup_query": "Berliner",
    "rfm_added": [1, 2],
    "fixed_added": [1, 2, 1],
}


def record_case(case: dict, index: Bm25Index, net: FeedbackNet,
                templates: TemplateSet) -> dict[str, str]:
    client = RecordingClient(QueueClient({
        "extract_triples": [case["analysis"]],
        "curate": list(case["curate"]),
        "resolve_placeholders": [case["resolve"]] * 2,
        "final_answer": [case["final"]] * 4,
    }))
    results = {}
    for mode in ("none", "vanilla", "fixed", "rfm"):
        deps = PipelineDeps(
            templates=templates, curator=client, answerer=client,
            index=None if mode == "none" else index,
            scorer=LexicalScorer() if mode == "rfm" else None,
            net=net if mode == "rfm" else None,
        )
        result = run_question(case["question"], deps, PipelineConfig(mode=mode))
        assert result.error is None, f"{case['id']} {mode}: {result.error}"
        assert result.extracted_answer == case["gold"], (
            f"{case['id']} {mode}: got {result.extracted_answer!r}")
        results[mode] = result

    assert results["none"].r_step == 0
    assert results["vanilla"].r_step == 1
    assert results["fixed"].r_step == 3
    rfm = results["rfm"]
    assert rfm.r_step == 2, f"{case['id']}: rfm took {rfm.r_step} rounds"
    assert not rfm.traces[0].decision.sufficient
    assert rfm.traces[1].decision.sufficient
    assert rfm.traces[1].query == case["followup_query"], rfm.traces[1].query
    assert [t.evidence_added for t in rfm.traces] == case["rfm_added"]
    assert [t.evidence_added for t in results["fixed"].traces] == case["fixed_added"]
    print(f"  {case['id']}: rfm answer {rfm.extracted_answer!r} in "
          f"{rfm.r_step} rounds, follow-up query {rfm.traces[1].query!r}")
    return client.entries


def replay_check(index: Bm25Index, net: FeedbackNet,
                 templates: TemplateSet) -> None:
    """Re-run every mode from the saved transcript and dataset, strictly."""
    records = load_eval_records(FIXTURES / "eval_cases.jsonl")
    deps = PipelineDeps(
        templates=templates,
        curator=ReplayClient.from_file(FIXTURES / "cases_transcript.json"),
        answerer=ReplayClient.from_file(FIXTURES / "cases_transcript.json"),
        index=index, scorer=LexicalScorer(), net=net,
    )
    configs = [PipelineConfig(mode=m) for m in ("none", "vanilla", "fixed", "rfm")]
    report = evaluate(records, deps, configs)
    for mode, want_steps in (("none", 0.0), ("vanilla", 1.0),
                             ("fixed", 3.0), ("rfm", 2.0)):
        summary = report.summaries[mode]
        assert summary.em == 1.0, f"{mode}: EM {summary.em}"
        assert summary.avg_r_step == want_steps, f"{mode}: {summary.avg_r_step}"
    print("  replay check: EM 1.0 in all four modes, step counts 0/1/3/2")


def main() -> int:
    FIXTURES.mkdir(exist_ok=True)
    templates = TemplateSet.load()

    save_corpus(DOCS, FIXTURES / "corpus.jsonl")
    index = Bm25Index(DOCS)
    index.save(FIXTURES / "index.json")

    # weights chosen so both demo questions pass the gate on the second round:
    # round one scores logits -3.5 and -4.27, round two +7.33 and +2.71
    net = FeedbackNet.from_linear(-22.0, 2.0, 17.0)
    net.save(FIXTURES / "feedback_net.json")

    print("recording demo transcripts")
    entries1 = record_case(CASE1, index, net, templates)
    entries2 = record_case(CASE2, index, net, templates)
    save_transcript(entries1, FIXTURES / "case1_transcript.json")
    save_transcript(entries2, FIXTURES / "case2_transcript.json")
    overlap = set(entries1) & set(entries2)
    assert not overlap, f"digest collision across cases: {overlap}"
    save_transcript({**entries1, **entries2}, FIXTURES / "cases_transcript.json")

    with open(FIXTURES / "eval_cases.jsonl", "w", encoding="utf-8") as fh:
        for case in (CASE1, CASE2):
            fh.write(json.dumps({
                "id": case["id"],
                "question": case["question"],
                "answers": [case["gold"]],
            }, ensure_ascii=False) + "\n")

    gold = [
        {
            "id": CASE1["id"],
            "question": CASE1["question"],
            "supports": CASE1["curate"][:2],
            "distractors": [DOCS[2].text, DOCS[3].text],
        },
        {
            "id": CASE2["id"],
            "question": CASE2["question"],
            "supports": CASE2["curate"][0:1] + CASE2["curate"][1].split("\n"),
            "distractors": [DOCS[6].text, DOCS[7].text],
        },
        {
            "id": "demo-range",
            "question": "Which mountain range separates the two study regions?",
            "supports": ["The northern region ends at the Gray Ridge range.",
                         "The southern region begins at the Gray Ridge range.",
                         "Gray Ridge is the only range between the regions."],
            "distractors": ["Both regions export timber and flax.",
                            "River traffic peaked in the 1920s."],
        },
    ]
    with open(FIXTURES / "gold_sample.jsonl", "w", encoding="utf-8") as fh:
        for record in gold:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    replay_check(index, net, templates)
    print(f"fixtures written to {FIXTURES}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

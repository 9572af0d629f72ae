"""Acceptance criteria for the bundled pipeline, one test per criterion.

Run with -v for one pass/fail line per criterion, or -s for the summary
prints. Every test here is offline by construction: the session-wide socket
guard in conftest.py turns any network attempt into a hard failure.
"""
import json
import random
import time
from pathlib import Path

import numpy as np
import pytest

from helpers import (
    OracleClient,
    ScriptRule,
    StepScorer,
    extraction_json,
    keyword_suite_world,
    recording_over,
    resolution_json,
)
from oracles import oracle_bm25_scores, oracle_gradient
from ragloop import Bm25Index, Document, FeedbackNet
from ragloop.cli import main
from ragloop.evaluation import EvalRecord, evaluate, load_eval_records, write_report
from ragloop.evidence import EvidencePool, EvidenceUnit
from ragloop.feedback import TrainConfig, syntactic_feature, train_on_features
from ragloop.feedback_data import generate_training_data, load_gold, save_examples
from ragloop.gaps import GapList, QuestionAnalysis, synthesize_query, update_gaps
from ragloop.llm import ReplayClient
from ragloop.pipeline import PipelineConfig, PipelineDeps, run_question
from ragloop.scorers import LexicalScorer, token_f1
from ragloop.templates import TemplateSet

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
TEMPLATES = TemplateSet.load()


def _ask(question: str, transcript: str, trace_path: Path) -> tuple[str, dict, float]:
    argv = [
        "ask", "--question", question, "--mode", "rfm",
        "--index", str(FIXTURES / "index.json"),
        "--model", str(FIXTURES / "feedback_net.json"),
        "--transcript", str(FIXTURES / transcript),
        "--trace", str(trace_path),
    ]
    start = time.perf_counter()
    code = main(argv)
    elapsed = time.perf_counter() - start
    assert code == 0
    return json.loads(trace_path.read_text()), elapsed


def test_01_bundled_question_one_answers_in_two_rounds(tmp_path, capsys):
    payload, elapsed = _ask(
        "Who is the mother of the director of film Polish-Russian War (Film)?",
        "case1_transcript.json", tmp_path / "t.json")
    answer = capsys.readouterr().out.strip().splitlines()[-1]
    assert answer == "Małgorzata Braunek"
    assert payload["r_step"] == 2
    assert payload["traces"][0]["decision"]["sufficient"] is False
    assert payload["traces"][1]["decision"]["sufficient"] is True
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    print(f"\nACCEPTANCE 1 PASS - demo question 1 answered correctly, "
          f"2 retrieval rounds, {elapsed:.3f}s, offline")


def test_02_bundled_question_two_chains_through_resolution(tmp_path, capsys):
    payload, elapsed = _ask(
        "What is the name of the dog pictured in the trademark of RCA Victor?",
        "case2_transcript.json", tmp_path / "t.json")
    answer = capsys.readouterr().out.strip().splitlines()[-1]
    assert answer == "Nipper"
    assert payload["r_step"] == 2
    # the second-round query is the grounded placeholder value, alone
    assert payload["traces"][1]["query"] == "Berliner"
    assert payload["traces"][0]["gaps"]["resolutions"] == ["Berliner"]
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    print(f"\nACCEPTANCE 2 PASS - demo question 2 answered correctly via "
          f"resolved follow-up query, 2 rounds, {elapsed:.3f}s")


_Q = "what connects alpha and beta in project zeta?"
_WORLD = [
    Document("d1", "one", "alpha is the first piece of project zeta."),
    Document("d2", "two", "beta is the second piece of project zeta."),
    Document("d3", "three", "gamma is unrelated entirely."),
]


def _world_rules() -> list[ScriptRule]:
    return [
        ScriptRule("extract_triples", "",
                   [extraction_json(["alpha", "beta"],
                                    [["alpha", "partner", "<X>"]])]),
        ScriptRule("curate", "", [
            "alpha is the first piece of project zeta.",
            "beta is the second piece of project zeta.",
            "gamma concluding detail noted.",
        ]),
        ScriptRule("resolve_placeholders", "",
                   [resolution_json(["gamma partner"])] * 2),
        ScriptRule("final_answer", "", ["So the answer is Zeta."] * 4),
    ]


def test_03_mode_round_budgets_with_gate_held_closed():
    client = recording_over(_world_rules())
    never = FeedbackNet.from_linear(0.0, 0.0, -20.0)
    steps = {}
    for mode in ("none", "vanilla", "fixed", "rfm"):
        deps = PipelineDeps(
            templates=TEMPLATES, curator=client, answerer=client,
            index=None if mode == "none" else Bm25Index(_WORLD),
            scorer=LexicalScorer() if mode == "rfm" else None,
            net=never if mode == "rfm" else None,
        )
        result = run_question(_Q, deps, PipelineConfig(mode=mode, max_iterations=3))
        assert result.error is None
        steps[mode] = result.r_step
    assert steps == {"none": 0, "vanilla": 1, "fixed": 3, "rfm": 3}
    print("\nACCEPTANCE 3 PASS - round budgets: none=0 vanilla=1 fixed=3, "
          "and a never-sufficient gate spends the full rfm budget (3)")


STOP_AT = [1, 2, 3, 1, 2, 1, 3, 2, 1, 2]


def test_04_ten_question_suite_average_rounds_and_quality():
    docs, questions, rules = keyword_suite_world(10)
    scorer = StepScorer({f"study{j}": s for j, s in enumerate(STOP_AT)})
    client = recording_over(rules)
    deps = PipelineDeps(
        templates=TEMPLATES, curator=client, answerer=client,
        index=Bm25Index(docs), scorer=scorer,
        net=FeedbackNet.from_linear(0.0, 20.0, -10.0),
    )
    records = [EvalRecord(f"q{j}", q, (f"topic{j}",))
               for j, q in enumerate(questions)]
    configs = [PipelineConfig(mode=m) for m in ("vanilla", "fixed", "rfm")]
    report = evaluate(records, deps, configs)

    rfm_steps = [row.r_step for row in report.rows if row.mode == "rfm"]
    assert rfm_steps == STOP_AT
    rfm, fixed = report.summaries["rfm"], report.summaries["fixed"]
    assert rfm.avg_r_step == 1.8  # sum(STOP_AT) / 10, exactly
    assert rfm.avg_r_step < fixed.avg_r_step == 3.0
    assert rfm.em >= fixed.em
    assert rfm.em == 1.0
    print("\nACCEPTANCE 4 PASS - 10-question suite: rfm stops adaptively "
          "(avg 1.8 rounds vs 3.0 fixed) with no quality loss (EM 1.0)")


def _pool(total: int, entity: str, mentions: int) -> EvidencePool:
    pool = EvidencePool()
    units = [EvidenceUnit(0, f"{entity} appears in note {i}.", 0, "q")
             for i in range(mentions)]
    units += [EvidenceUnit(0, f"unrelated filler line number {i}.", 0, "q")
              for i in range(total - mentions)]
    pool.add_units(units)
    assert len(pool) == total
    return pool


def test_05_coverage_and_feature_arithmetic_is_exact():
    from ragloop.gaps import entity_coverage

    assert entity_coverage(_pool(4, "beacon", 2), "beacon") == 0.5
    assert entity_coverage(_pool(4, "beacon", 1), "beacon") == 0.25
    assert entity_coverage(_pool(3, "beacon", 1), "beacon") == 1 / 3

    # mean of per-entity coverages, binary-exact case: (0.5 + 0.25) / 2
    pool = EvidencePool()
    pool.add_units(
        [EvidenceUnit(0, "beacon and anchor in note 0.", 0, "q"),
         EvidenceUnit(0, "beacon alone in note 1.", 0, "q"),
         EvidenceUnit(0, "filler line here now.", 0, "q"),
         EvidenceUnit(0, "more filler text follows.", 0, "q")])
    analysis = QuestionAnalysis(("beacon", "anchor"), ())
    assert syntactic_feature(analysis, pool) == 0.375

    # the gap threshold is strict: exactly-at-threshold is not a gap
    at_threshold = _pool(10, "beacon", 1)   # coverage 1/10 == 0.1
    analysis2 = QuestionAnalysis(("beacon", "ghost"), ())
    assert update_gaps(analysis2, at_threshold, 0.1) == ("ghost",)

    assert token_f1("a b", "b c") == 0.5
    assert token_f1("same words", "same words") == 1.0
    assert token_f1("", "") == 1.0

    q = synthesize_query(GapList(tuple(f"w{i}" for i in range(30)), ()))
    assert len(q.split()) == 16
    print("\nACCEPTANCE 5 PASS - coverage fractions, feature means, strict "
          "threshold, overlap score, and query truncation are all exact")


def test_06_retrieval_matches_brute_force_oracle_on_100_corpora():
    vocab = [f"w{i:02d}" for i in range(30)]
    worst = 0.0
    for seed in range(100):
        rng = random.Random(seed)
        n_docs = rng.randint(1, 50)
        docs = {
            f"doc{i:03d}": " ".join(rng.choices(vocab, k=rng.randint(1, 30)))
            for i in range(n_docs)
        }
        query_terms = rng.choices(vocab + ["absent"], k=rng.randint(1, 8))
        query = " ".join(query_terms)

        index = Bm25Index([Document(i, "", t) for i, t in docs.items()])
        hits = index.retrieve(query, n_docs)
        expected = oracle_bm25_scores(docs, query)

        assert {h.doc_id for h in hits} == set(expected)
        for hit in hits:
            worst = max(worst, abs(hit.score - expected[hit.doc_id]))
        # order is non-increasing under the oracle's scores as well
        for a, b in zip(hits, hits[1:]):
            assert expected[a.doc_id] >= expected[b.doc_id] - 1e-9
    assert worst <= 1e-9, f"worst score deviation {worst:.3e}"
    print(f"\nACCEPTANCE 6 PASS - 100 random corpora (up to 50 docs, 8-term "
          f"queries) match the brute-force scorer; worst gap {worst:.1e}")


def test_07_analytic_gradients_match_finite_differences():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        net = FeedbackNet(seed=int(rng.integers(10_000)))
        net.set_params(rng.normal(0.0, 0.8, size=net.get_params().size))
        x = rng.uniform(0.05, 1.0, size=(4, 2))
        y = rng.integers(0, 2, size=4).astype(np.float64)
        _, grads = net.loss_and_grads(x, y)
        analytic = net.flat_grads(grads)
        numeric = oracle_gradient(net, x, y)
        rel = np.linalg.norm(analytic - numeric) / max(
            np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        worst = max(worst, rel)
    assert worst <= 1e-6, f"worst relative error {worst:.3e}"
    print(f"\nACCEPTANCE 7 PASS - gradients match central differences over "
          f"20 random draws; worst relative error {worst:.1e}")


def test_08_trained_gate_beats_linear_baseline_on_synthetic_task():
    sklearn_linear = pytest.importorskip("sklearn.linear_model")

    rng = np.random.default_rng(0)
    x = rng.uniform(0.0, 1.0, size=(2000, 2))
    y = ((x[:, 0] > 0.6) & (x[:, 1] > 0.6)).astype(np.float64)
    flip = rng.uniform(size=2000) < 0.05
    y = np.where(flip, 1.0 - y, y)
    x_train, y_train, x_test, y_test = x[:1600], y[:1600], x[1600:], y[1600:]

    start = time.perf_counter()
    net = FeedbackNet(seed=0)
    train_on_features(net, x_train, y_train, TrainConfig())
    train_time = time.perf_counter() - start
    net_acc = float(np.mean(net.predict(x_test) == y_test))

    baseline = sklearn_linear.LogisticRegression().fit(x_train, y_train)
    baseline_acc = float(baseline.score(x_test, y_test))

    assert train_time < 30.0, f"training took {train_time:.1f}s"
    assert baseline_acc >= 0.85, f"baseline sanity: {baseline_acc:.3f}"
    assert net_acc >= 0.90, f"gate accuracy {net_acc:.3f}"
    assert net_acc >= baseline_acc - 0.05
    print(f"\nACCEPTANCE 8 PASS - held-out accuracy {net_acc:.3f} vs linear "
          f"baseline {baseline_acc:.3f}, trained in {train_time:.1f}s")


def test_09_training_data_generator_contract(tmp_path):
    gold = load_gold(FIXTURES / "gold_sample.jsonl")
    outputs = []
    for run in range(2):
        examples, report = generate_training_data(gold, 400, seed=0)
        path = tmp_path / f"run{run}.jsonl"
        save_examples(examples, path)
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]

    assert report.n_examples == 400
    assert report.n_skipped == 0
    share = report.n_positive / report.n_examples
    assert 0.45 <= share <= 0.55
    counts = report.category_counts
    assert set(counts) == {"sufficient", "insufficient", "partial"}
    assert all(v > 0 for v in counts.values())
    print(f"\nACCEPTANCE 9 PASS - generator: {share:.0%} positive, all three "
          f"context patterns present ({counts}), reruns byte-identical")


def test_10_bundled_evaluation_reproducible_and_fast(tmp_path):
    records = load_eval_records(FIXTURES / "eval_cases.jsonl")
    start = time.perf_counter()
    outdirs = []
    for run in range(2):
        deps = PipelineDeps(
            templates=TEMPLATES,
            curator=ReplayClient.from_file(FIXTURES / "cases_transcript.json"),
            answerer=ReplayClient.from_file(FIXTURES / "cases_transcript.json"),
            index=Bm25Index.load(FIXTURES / "index.json"),
            scorer=LexicalScorer(),
            net=FeedbackNet.load(FIXTURES / "feedback_net.json"),
        )
        configs = [PipelineConfig(mode=m)
                   for m in ("none", "vanilla", "fixed", "rfm")]
        report = evaluate(records, deps, configs)
        outdir = tmp_path / f"run{run}"
        write_report(report, outdir)
        outdirs.append(outdir)
        assert report.summaries["rfm"].em == 1.0
        assert report.summaries["rfm"].avg_r_step == 2.0
    elapsed = time.perf_counter() - start

    first, second = outdirs
    compared = 0
    for path in sorted(first.rglob("*")):
        if path.is_file():
            twin = second / path.relative_to(first)
            assert twin.read_bytes() == path.read_bytes(), path.name
            compared += 1
    assert compared >= 10  # report, csv, and a trace per (question, mode)
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    print(f"\nACCEPTANCE 10 PASS - full bundled evaluation twice in "
          f"{elapsed:.2f}s, {compared} output files byte-identical, offline")

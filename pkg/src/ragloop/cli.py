"""Command-line interface.

Subcommands: index, ask, eval, gen-feedback-data, train-feedback. Options can
also be supplied through a JSON config file whose keys mirror the long flag
names (dashes as underscores); explicit flags win over the config file, which
wins over built-in defaults. Exit codes: 0 success, 1 runtime failure, 2 bad
usage. Primary results go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

from .corpus import load_corpus
from .errors import RagLoopError
from .evaluation import evaluate, format_summary, load_eval_records, write_report
from .feedback import FeedbackNet, TrainConfig
from .feedback_data import (generate_training_data, load_examples, load_gold,
                            save_examples, train_on_examples)
from .index import Bm25Index
from .llm import HttpChatClient, ReplayClient
from .pipeline import MODES, PipelineConfig, PipelineDeps, run_question, write_trace
from .scorers import HttpScorer, LexicalScorer
from .templates import TemplateSet

_DEFAULTS: dict[str, dict[str, Any]] = {
    "index": {"k1": 1.2, "b": 0.75},
    "ask": {
        "mode": "rfm", "theta": 0.1, "tau": 0.5, "max_iterations": 3,
        "top_k": 5, "few_shot": 4, "scorer": "lexical", "llm_model": "default",
        "transcript": None, "model": None, "index": None, "trace": None,
        "templates": None,
    },
    "eval": {
        "modes": "vanilla,rfm", "theta": 0.1, "tau": 0.5, "max_iterations": 3,
        "top_k": 5, "few_shot": 4, "scorer": "lexical", "llm_model": "default",
        "transcript": None, "model": None, "index": None, "templates": None,
        "parallel": 1,
    },
    "gen-feedback-data": {"count": 1000, "seed": 0},
    "train-feedback": {
        "seed": 0, "lr": 0.05, "epochs": 200, "batch": 32,
        "val_fraction": 0.1, "hidden": "16,8", "tau": 0.5, "scorer": "lexical",
    },
}


def entry() -> None:
    sys.exit(main())


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    opts = _resolve_options(parser, args)
    try:
        return args.func(opts, parser)
    except RagLoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragloop",
        description="Iterative retrieval-augmented QA with a learned feedback gate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build and persist a BM25 index")
    p.add_argument("--corpus", help="JSONL corpus of {id, title, text}")
    p.add_argument("--out", help="output index file")
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    _common(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("ask", help="answer one question")
    p.add_argument("--question")
    p.add_argument("--index", help="BM25 index file (retrieval modes)")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--transcript", help="replay transcript; omitting it uses "
                                        "the live endpoint from LLM_ENDPOINT")
    p.add_argument("--model", help="feedback net model file (rfm mode)")
    p.add_argument("--trace", help="write the run trace JSON here")
    p.add_argument("--templates", help="directory of prompt template files")
    p.add_argument("--theta", type=float, help="entity coverage gap threshold")
    p.add_argument("--tau", type=float, help="sufficiency decision threshold")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--few-shot", type=int)
    p.add_argument("--scorer", choices=("lexical", "http"))
    p.add_argument("--llm-model", help="model name for the live chat endpoint")
    _common(p)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", help="evaluate a dataset across modes")
    p.add_argument("--dataset", help="JSONL of {id, question, answers}")
    p.add_argument("--out", help="report output directory")
    p.add_argument("--modes", help="comma list drawn from none,vanilla,fixed,rfm")
    p.add_argument("--index")
    p.add_argument("--transcript")
    p.add_argument("--model")
    p.add_argument("--templates")
    p.add_argument("--theta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--top-k", type=int)
    p.add_argument("--few-shot", type=int)
    p.add_argument("--scorer", choices=("lexical", "http"))
    p.add_argument("--llm-model")
    p.add_argument("--parallel", type=int, help="questions evaluated concurrently")
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-feedback-data",
                       help="generate balanced sufficiency training data")
    p.add_argument("--gold", help="JSONL of {id, question, supports, distractors}")
    p.add_argument("--out", help="output JSONL of {question, context, label}")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    _common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-feedback", help="train the sufficiency gate")
    p.add_argument("--data", help="JSONL of {question, context, label}")
    p.add_argument("--out", help="output model file")
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--hidden", help="two comma-separated layer sizes")
    p.add_argument("--tau", type=float)
    p.add_argument("--scorer", choices=("lexical", "http"))
    _common(p)
    p.set_defaults(func=cmd_train)

    return parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with defaults for these flags")


def _resolve_options(parser: argparse.ArgumentParser,
                     args: argparse.Namespace) -> dict[str, Any]:
    """Merge flag > config file > default for the chosen subcommand."""
    defaults = _DEFAULTS.get(args.command, {})
    config: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config file {args.config}: {exc}")
        if not isinstance(config, dict):
            parser.error(f"config file {args.config} must hold a JSON object")
    skip = {"command", "func", "config"}
    known = {k for k in vars(args) if k not in skip} | set(defaults)
    for key in config:
        if key not in known:
            parser.error(f"unknown config key {key!r} for command {args.command!r}")
    opts: dict[str, Any] = {}
    for key in known:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            opts[key] = flag_value
        elif key in config:
            opts[key] = config[key]
        else:
            opts[key] = defaults.get(key)
    return opts


def _require(opts: dict[str, Any], key: str,
             parser: argparse.ArgumentParser) -> Any:
    if opts.get(key) in (None, ""):
        parser.error(f"--{key.replace('_', '-')} is required")
    return opts[key]


def _build_llm(opts: dict[str, Any], parser: argparse.ArgumentParser):
    if opts.get("transcript"):
        return ReplayClient.from_file(opts["transcript"], strict=True)
    endpoint = os.environ.get("LLM_ENDPOINT", "")
    if not endpoint:
        parser.error("no --transcript given and LLM_ENDPOINT is not set")
    return HttpChatClient(endpoint, api_key=os.environ.get("LLM_API_KEY", ""),
                          model=opts.get("llm_model") or "default")


def _build_scorer(opts: dict[str, Any], parser: argparse.ArgumentParser):
    if opts.get("scorer") == "http":
        endpoint = os.environ.get("SCORER_ENDPOINT", "")
        if not endpoint:
            parser.error("--scorer http requires SCORER_ENDPOINT")
        return HttpScorer(endpoint)
    return LexicalScorer()


def _build_deps(opts: dict[str, Any], parser: argparse.ArgumentParser,
                modes: list[str]) -> PipelineDeps:
    needs_index = any(m != "none" for m in modes)
    needs_net = "rfm" in modes
    if needs_index:
        _require(opts, "index", parser)
    if needs_net:
        _require(opts, "model", parser)
    llm = _build_llm(opts, parser)
    return PipelineDeps(
        templates=TemplateSet.load(opts.get("templates")),
        curator=llm,
        answerer=llm,
        index=Bm25Index.load(opts["index"]) if needs_index else None,
        scorer=_build_scorer(opts, parser) if needs_net else None,
        net=FeedbackNet.load(opts["model"]) if needs_net else None,
    )


def _pipeline_config(opts: dict[str, Any], mode: str) -> PipelineConfig:
    return PipelineConfig(
        mode=mode,
        max_iterations=int(opts["max_iterations"]),
        top_k=int(opts["top_k"]),
        coverage_threshold=float(opts["theta"]),
        tau=float(opts["tau"]),
        few_shot=int(opts["few_shot"]),
    )


# --- subcommands ------------------------------------------------------------


def cmd_index(opts: dict[str, Any], parser: argparse.ArgumentParser) -> int:
    corpus = load_corpus(_require(opts, "corpus", parser))
    index = Bm25Index(corpus, k1=float(opts["k1"]), b=float(opts["b"]))
    index.save(_require(opts, "out", parser))
    print(f"indexed {index.doc_count} documents (avg length {index.avg_doc_length:.2f})")
    return 0


def cmd_ask(opts: dict[str, Any], parser: argparse.ArgumentParser) -> int:
    question = _require(opts, "question", parser)
    mode = opts["mode"]
    deps = _build_deps(opts, parser, [mode])
    result = run_question(question, deps, _pipeline_config(opts, mode))
    if opts.get("trace"):
        write_trace(result, opts["trace"])
        print(f"trace written to {opts['trace']}", file=sys.stderr)
    if result.error is not None:
        print(f"error: {result.error}", file=sys.stderr)
        return 1
    print(result.extracted_answer)
    return 0


def cmd_eval(opts: dict[str, Any], parser: argparse.ArgumentParser) -> int:
    modes = [m.strip() for m in str(opts["modes"]).split(",") if m.strip()]
    if not modes:
        parser.error("--modes must name at least one mode")
    for mode in modes:
        if mode not in MODES:
            parser.error(f"unknown mode {mode!r}; expected one of {MODES}")
    records = load_eval_records(_require(opts, "dataset", parser))
    outdir = Path(_require(opts, "out", parser))
    parallel = int(opts["parallel"])
    if parallel < 1:
        parser.error("--parallel must be at least 1")
    deps = _build_deps(opts, parser, modes)
    configs = [_pipeline_config(opts, mode) for mode in modes]
    report = evaluate(records, deps, configs, parallel=parallel)
    write_report(report, outdir)
    print(f"report written to {outdir}", file=sys.stderr)
    print(format_summary(report))
    failures = [row for row in report.rows if row.error]
    for row in failures:
        print(f"failed: {row.record_id} [{row.mode}] {row.error}", file=sys.stderr)
    return 0


def cmd_gen_data(opts: dict[str, Any], parser: argparse.ArgumentParser) -> int:
    gold = load_gold(_require(opts, "gold", parser))
    examples, report = generate_training_data(gold, int(opts["count"]),
                                              int(opts["seed"]))
    save_examples(examples, _require(opts, "out", parser))
    share = report.n_positive / report.n_examples
    cats = ", ".join(f"{k}={v}" for k, v in sorted(report.category_counts.items()))
    print(f"generated {report.n_examples} examples "
          f"({share:.1%} positive; {cats}; skipped {report.n_skipped} records)")
    return 0


def cmd_train(opts: dict[str, Any], parser: argparse.ArgumentParser) -> int:
    examples = load_examples(_require(opts, "data", parser))
    try:
        hidden = tuple(int(part) for part in str(opts["hidden"]).split(","))
    except ValueError:
        parser.error(f"bad --hidden value {opts['hidden']!r}")
    if len(hidden) != 2:
        parser.error("--hidden must name exactly two layer sizes")
    net = FeedbackNet(hidden=hidden, tau=float(opts["tau"]), seed=int(opts["seed"]))
    cfg = TrainConfig(lr=float(opts["lr"]), epochs=int(opts["epochs"]),
                      batch_size=int(opts["batch"]), seed=int(opts["seed"]),
                      val_fraction=float(opts["val_fraction"]))
    report = train_on_examples(net, examples, _build_scorer(opts, parser), cfg)
    net.save(_require(opts, "out", parser))
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    losses = report.epoch_losses
    print(f"trained on {report.n_train} examples ({report.n_val} held out)")
    print(f"loss: first epoch {losses[0]:.4f}, final epoch {losses[-1]:.4f}")
    if report.val_accuracy is not None:
        print(f"val accuracy: {report.val_accuracy:.4f}")
    return 0

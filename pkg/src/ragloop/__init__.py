"""Iterative retrieval-augmented QA with a learned retrieval-feedback gate."""
from __future__ import annotations

from .corpus import Document, load_corpus, save_corpus
from .errors import RagLoopError
from .evaluation import (EvalRecord, EvalReport, accuracy, evaluate, exact_match,
                         load_eval_records, normalize_answer, write_report)
from .evidence import EvidencePool, EvidenceUnit, curate
from .feedback import (FeatureVector, FeedbackDecision, FeedbackNet, TrainConfig,
                       semantic_feature, syntactic_feature, train_on_features)
from .feedback_data import (GoldRecord, TrainingExample, generate_training_data,
                            load_examples, load_gold, save_examples,
                            train_on_examples)
from .gaps import (GapList, QuestionAnalysis, RelationTriple, analyze_question,
                   entity_coverage, resolve_placeholders, synthesize_query,
                   update_gaps)
from .index import Bm25Index, RetrievedPassage
from .llm import (ChatRequest, ChatResponse, HttpChatClient, RecordingClient,
                  ReplayClient, load_transcript, request_digest, save_transcript)
from .pipeline import (PipelineConfig, PipelineDeps, RunResult, extract_answer,
                       run_question, write_trace)
from .scorers import HttpScorer, LexicalScorer, token_f1
from .templates import PromptTemplate, TemplateSet, render_prompt

__version__ = "0.1.0"

__all__ = [
    "Bm25Index", "ChatRequest", "ChatResponse", "Document", "EvalRecord",
    "EvalReport", "EvidencePool", "EvidenceUnit", "FeatureVector",
    "FeedbackDecision", "FeedbackNet", "GapList", "GoldRecord", "HttpChatClient",
    "HttpScorer", "LexicalScorer", "PipelineConfig", "PipelineDeps",
    "PromptTemplate", "QuestionAnalysis", "RagLoopError", "RecordingClient",
    "RelationTriple", "ReplayClient", "RetrievedPassage", "RunResult",
    "TemplateSet", "TrainConfig", "TrainingExample", "accuracy",
    "analyze_question", "curate", "entity_coverage", "evaluate", "exact_match",
    "extract_answer", "generate_training_data", "load_corpus",
    "load_eval_records", "load_examples", "load_gold", "load_transcript",
    "normalize_answer", "render_prompt", "request_digest", "resolve_placeholders",
    "run_question", "save_corpus", "save_examples", "save_transcript",
    "semantic_feature", "synthesize_query", "syntactic_feature", "token_f1",
    "train_on_examples", "train_on_features", "update_gaps", "write_report",
    "write_trace",
]

"""Okapi BM25 inverted index over a document corpus.

Only document text is indexed; titles are carried as metadata. The index
build and retrieval are fully deterministic: ties are broken by ascending
document id and per-document scores accumulate in query-token order.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import Document
from .errors import CorpusError
from .text import tokenize

FORMAT_VERSION = 1


@dataclass(frozen=True)
class RetrievedPassage:
    doc_id: str
    rank: int
    score: float
    text: str


class Bm25Index:
    def __init__(self, corpus: list[Document], k1: float = 1.2, b: float = 0.75):
        if k1 < 0 or not 0 <= b <= 1:
            raise ValueError(f"invalid BM25 parameters k1={k1} b={b}")
        self.k1 = k1
        self.b = b
        self.documents = list(corpus)
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self.doc_lengths: dict[str, int] = {}
        self._texts: dict[str, str] = {}
        for doc in self.documents:
            tokens = tokenize(doc.text)
            self.doc_lengths[doc.id] = len(tokens)
            self._texts[doc.id] = doc.text
            for term, tf in sorted(Counter(tokens).items()):
                self.postings.setdefault(term, []).append((doc.id, tf))
        self.doc_count = len(self.documents)
        total = sum(self.doc_lengths.values())
        self.avg_doc_length = total / self.doc_count if self.doc_count else 0.0

    # ln((N - df + 0.5) / (df + 0.5) + 1), always positive
    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        n = self.doc_count
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def retrieve(self, query: str, k: int) -> list[RetrievedPassage]:
        """Top-k passages by BM25 score, ties broken by ascending doc id.

        Documents sharing no term with the query are never returned, so the
        result may be shorter than k.
        """
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        scores: dict[str, float] = {}
        for term in tokenize(query):
            posting = self.postings.get(term)
            if not posting:
                continue
            idf = self.idf(term)
            for doc_id, tf in posting:
                dl = self.doc_lengths[doc_id]
                norm = self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_length)
                scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (self.k1 + 1.0) / (tf + norm)
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        return [
            RetrievedPassage(doc_id, rank, score, self._texts[doc_id])
            for rank, (doc_id, score) in enumerate(ranked, start=1)
        ]

    def save(self, path: str | Path) -> None:
        payload = {
            "version": FORMAT_VERSION,
            "k1": self.k1,
            "b": self.b,
            "documents": [
                {"id": d.id, "title": d.title, "text": d.text} for d in self.documents
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("version") != FORMAT_VERSION:
            raise CorpusError(
                f"unsupported index version {payload.get('version')!r} in {path}"
            )
        docs = [Document(d["id"], d["title"], d["text"]) for d in payload["documents"]]
        return cls(docs, k1=payload["k1"], b=payload["b"])

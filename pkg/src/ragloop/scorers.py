"""Relevance scorers mapping (query, text) to a score in [0, 1]."""
from __future__ import annotations

import json
from collections import Counter
from typing import Protocol

import httpx

from .errors import ScorerError
from .text import tokenize


class RelevanceScorer(Protocol):
    def score(self, query: str, text: str) -> float: ...


def token_f1(query: str, text: str) -> float:
    """Token-level F1 between the normalized token multisets of both strings."""
    q = Counter(tokenize(query))
    t = Counter(tokenize(text))
    overlap = sum((q & t).values())
    total = sum(q.values()) + sum(t.values())
    if overlap == 0:
        return 1.0 if total == 0 else 0.0
    return 2.0 * overlap / total


class LexicalScorer:
    """Offline fallback scorer built on token overlap."""

    def score(self, query: str, text: str) -> float:
        return token_f1(query, text)


class HttpScorer:
    """Remote scorer: POST {"query", "text"} -> {"score": float}.

    Scores outside [0, 1] are clamped; malformed replies raise ScorerError.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0, transport=None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.transport = transport or self._post

    def _post(self, url: str, body: dict, timeout: float) -> tuple[int, str]:
        response = httpx.post(url, json=body, timeout=timeout)
        return response.status_code, response.text

    def score(self, query: str, text: str) -> float:
        try:
            status, raw = self.transport(self.endpoint, {"query": query, "text": text},
                                         self.timeout)
        except Exception as exc:
            raise ScorerError(f"scorer endpoint unreachable: {exc}") from exc
        if status != 200:
            raise ScorerError(f"scorer endpoint returned HTTP {status}")
        try:
            value = json.loads(raw)["score"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ScorerError(f"malformed scorer reply: {raw[:200]}") from exc
        if not isinstance(value, (int, float)):
            raise ScorerError(f"scorer value is not numeric: {value!r}")
        return min(max(float(value), 0.0), 1.0)

"""Chat-completion clients: live HTTP, deterministic replay, and recording.

Replay transcripts map a digest of (template name, rendered user prompt) to a
canned response, which makes every downstream pipeline run reproducible and
network-free. The digest ignores trailing whitespace of the rendered prompt.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx

from .errors import DeterminismError, TransportError

TRANSCRIPT_VERSION = 1
DEFAULT_SYSTEM = "You are a careful assistant for factual question answering."

# transport(url, headers, body, timeout) -> (status_code, response_text)
Transport = Callable[[str, dict[str, str], dict[str, Any], float], tuple[int, str]]


@dataclass(frozen=True)
class ChatRequest:
    template: str
    system: str
    user: str
    temperature: float = 0.0
    max_tokens: int = 512


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"


class LlmClient(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def request_digest(template_name: str, user_text: str) -> str:
    payload = f"{template_name}\n{user_text.rstrip()}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def first_json_block(text: str) -> Any:
    """Parse the first fenced JSON block in a response; ValueError when absent."""
    import re

    match = re.search(r"```(?:json)?\s*\n(.*?)```", text, re.DOTALL)
    if match is None:
        raise ValueError("no fenced JSON block found")
    try:
        return json.loads(match.group(1))
    except json.JSONDecodeError as exc:
        raise ValueError(f"fenced block is not valid JSON: {exc}") from exc


def load_transcript(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != TRANSCRIPT_VERSION:
        raise TransportError(f"unsupported transcript version in {path}")
    entries = payload.get("entries")
    if not isinstance(entries, dict):
        raise TransportError(f"transcript {path} has no entries map")
    return dict(entries)


def save_transcript(entries: dict[str, str], path: str | Path) -> None:
    payload = {"version": TRANSCRIPT_VERSION, "entries": dict(sorted(entries.items()))}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


class ReplayClient:
    """Serves canned responses from a transcript; performs no network activity.

    In strict mode a missing entry raises DeterminismError carrying the digest
    and the rendered prompt; otherwise the miss yields an empty response.
    """

    def __init__(self, entries: dict[str, str], strict: bool = True):
        self.entries = dict(entries)
        self.strict = strict
        self.calls: list[tuple[str, str]] = []

    @classmethod
    def from_file(cls, path: str | Path, strict: bool = True) -> "ReplayClient":
        return cls(load_transcript(path), strict=strict)

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request_digest(request.template, request.user)
        self.calls.append((request.template, digest))
        if digest in self.entries:
            return ChatResponse(self.entries[digest])
        if self.strict:
            raise DeterminismError(digest, request.user)
        return ChatResponse("", finish_reason="miss")


class RecordingClient:
    """Wraps another client and captures its responses as a replay transcript."""

    def __init__(self, inner: LlmClient):
        self.inner = inner
        self.entries: dict[str, str] = {}

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request_digest(request.template, request.user)
        if digest in self.entries:
            return ChatResponse(self.entries[digest])
        response = self.inner.complete(request)
        self.entries[digest] = response.text
        return response

    def save(self, path: str | Path) -> None:
        save_transcript(self.entries, path)


def _default_transport(url: str, headers: dict[str, str], body: dict[str, Any],
                       timeout: float) -> tuple[int, str]:
    response = httpx.post(url, headers=headers, json=body, timeout=timeout)
    return response.status_code, response.text


class HttpChatClient:
    """Minimal client for the de-facto chat-completion HTTP schema.

    Transient failures (transport errors, 429, 5xx) are retried with
    exponential backoff up to max_retries; other non-200 statuses fail fast.
    """

    def __init__(self, endpoint: str, api_key: str = "", model: str = "default",
                 max_retries: int = 3, backoff: float = 0.5, timeout: float = 60.0,
                 transport: Transport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self.transport = transport or _default_transport
        self.sleep = sleep

    def complete(self, request: ChatRequest) -> ChatResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        last_failure = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                status, text = self.transport(self.endpoint, headers, body, self.timeout)
            except Exception as exc:  # transport-level failure, retryable
                last_failure = f"transport error: {exc}"
                continue
            if status == 429 or status >= 500:
                last_failure = f"HTTP {status}"
                continue
            if status != 200:
                raise TransportError(f"chat endpoint returned HTTP {status}: {text[:200]}")
            return _parse_chat_body(text)
        raise TransportError(
            f"chat endpoint failed after {self.max_retries + 1} attempts ({last_failure})"
        )


def _parse_chat_body(text: str) -> ChatResponse:
    try:
        payload = json.loads(text)
        choice = payload["choices"][0]
        content = choice["message"]["content"]
        finish = choice.get("finish_reason", "stop")
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"malformed chat completion body: {text[:200]}") from exc
    if not isinstance(content, str):
        raise TransportError("chat completion content is not a string")
    return ChatResponse(content, finish_reason=str(finish))

"""JSON Lines corpus loading."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import CorpusError

_REQUIRED_FIELDS = ("id", "title", "text")


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    text: str


def load_corpus(path: str | Path) -> list[Document]:
    """Read documents from a JSONL file of {"id", "title", "text"} objects.

    Raises CorpusError naming the offending line for malformed JSON, missing
    or empty fields, and duplicate ids.
    """
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc})") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"line {lineno}: expected an object")
            for field in _REQUIRED_FIELDS:
                if field not in obj:
                    raise CorpusError(f"line {lineno}: missing field {field!r}")
                if not isinstance(obj[field], str):
                    raise CorpusError(f"line {lineno}: field {field!r} must be a string")
            if not obj["id"]:
                raise CorpusError(f"line {lineno}: empty document id")
            if not obj["text"]:
                raise CorpusError(f"line {lineno}: empty text for id {obj['id']!r}")
            if obj["id"] in seen:
                raise CorpusError(f"line {lineno}: duplicate document id {obj['id']!r}")
            seen.add(obj["id"])
            docs.append(Document(obj["id"], obj["title"], obj["text"]))
    return docs


def save_corpus(docs: list[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(
                {"id": doc.id, "title": doc.title, "text": doc.text},
                ensure_ascii=False,
            ) + "\n")

"""Text normalization shared by indexing, evidence handling, and scoring."""
from __future__ import annotations

import re
import unicodedata

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")

# NFKD strips combining marks; these letters do not decompose and need a table.
_FOLD = str.maketrans({
    "ł": "l", "Ł": "L", "ø": "o", "Ø": "O", "đ": "d", "Đ": "D",
    "ð": "d", "Ð": "D", "þ": "th", "Þ": "Th", "ß": "ss",
    "æ": "ae", "Æ": "AE", "œ": "oe", "Œ": "OE",
})

STOPWORDS = frozenset(
    """a an the is are was were be been being am do does did has have had what
    which who whom whose when where why how of in on at to from by for with
    about into over under and or but not no nor it its this that these those
    as if then than so such there here he him she her they them his their i
    you we me my your our us will would can could should may might must""".split()
)


def fold_ascii(text: str) -> str:
    """Fold diacritics to plain ASCII letters, keeping other scripts intact."""
    decomposed = unicodedata.normalize("NFKD", text.translate(_FOLD))
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens, diacritics folded, split on everything else."""
    return _TOKEN_RE.findall(fold_ascii(text).lower())


def normalize_text(text: str) -> str:
    """Canonical single-spaced form used for dedup and containment checks."""
    return " ".join(tokenize(text))


def contains_tokens(haystack: tuple[str, ...], needle: tuple[str, ...]) -> bool:
    """True when needle occurs as a contiguous run inside haystack."""
    if not needle or len(needle) > len(haystack):
        return False
    first = needle[0]
    for i in range(len(haystack) - len(needle) + 1):
        if haystack[i] == first and haystack[i : i + len(needle)] == needle:
            return True
    return False


def split_sentences(text: str) -> list[str]:
    """Naive sentence split on terminal punctuation followed by whitespace."""
    return [part.strip() for part in _SENTENCE_RE.split(text) if part.strip()]


def content_tokens(text: str) -> list[str]:
    """Unique non-stopword tokens in first-seen order."""
    seen: set[str] = set()
    out: list[str] = []
    for tok in tokenize(text):
        if tok not in STOPWORDS and tok not in seen:
            seen.add(tok)
            out.append(tok)
    return out

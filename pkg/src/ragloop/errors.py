"""Exception types shared across the package."""
from __future__ import annotations


class RagLoopError(Exception):
    """Base class for all errors raised by this package."""


class CorpusError(RagLoopError):
    """Corpus file is malformed or violates the document schema."""


class TemplateError(RagLoopError):
    """Prompt template is missing, unreadable, or a render slot is unbound."""


class TransportError(RagLoopError):
    """Remote chat or scorer endpoint failed after retries."""


class DeterminismError(RagLoopError):
    """A replay transcript has no entry for a rendered prompt."""

    def __init__(self, digest: str, prompt: str):
        super().__init__(
            f"no transcript entry for digest {digest}; prompt was:\n{prompt}"
        )
        self.digest = digest
        self.prompt = prompt


class CurationFormatError(RagLoopError):
    """Curation output could not be parsed into evidence lines."""

    def __init__(self, raw: str):
        super().__init__(f"unparseable curation output: {raw!r}")
        self.raw = raw


class ExtractionFormatError(RagLoopError):
    """Entity/triple extraction output lacked a parseable JSON block."""

    def __init__(self, raw: str, reason: str = "no parseable JSON block"):
        super().__init__(f"bad extraction output ({reason}): {raw!r}")
        self.raw = raw


class DegenerateAnalysisError(RagLoopError):
    """Question analysis produced no entities."""


class ScorerError(RagLoopError):
    """Relevance scorer returned an unusable response."""


class NumericError(RagLoopError):
    """A numeric computation produced non-finite values."""


class DataError(RagLoopError):
    """Training or gold data file is malformed or unusable."""

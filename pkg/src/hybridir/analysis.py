"""Text analysis shared by indexing and query parsing.

Tokens are maximal runs of alphanumeric code points (Unicode categories L*
and N*). Everything else separates tokens. The chain is lowercase, then
stopword removal, then optional Porter stemming.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any

import snowballstemmer

STEMMERS = ("none", "porter-english")

# In Python's unicode regex, \w is isalnum() plus "_", so this is exactly L*|N*.
_TOKEN_RE = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class AnalyzerConfig:
    lowercase: bool = True
    stopwords: frozenset[str] = field(default_factory=frozenset)
    stemmer: str = "none"

    def __post_init__(self) -> None:
        if self.stemmer not in STEMMERS:
            raise ValueError(f"unknown stemmer {self.stemmer!r}, expected one of {STEMMERS}")
        if not isinstance(self.stopwords, frozenset):
            object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def to_dict(self) -> dict[str, Any]:
        return {
            "lowercase": self.lowercase,
            "stopwords": sorted(self.stopwords),
            "stemmer": self.stemmer,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AnalyzerConfig:
        return cls(
            lowercase=bool(data["lowercase"]),
            stopwords=frozenset(data["stopwords"]),
            stemmer=data["stemmer"],
        )

    def digest(self) -> str:
        """SHA-256 over the canonical JSON form; recorded in the store manifest."""
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Read a UTF-8 stopword file: one token per line, trimmed, blanks ignored."""
    text = Path(path).read_text(encoding="utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def simple_lower(token: str) -> str:
    # str.lower() applies full case mapping and the final-sigma rule; we want
    # the context-free one-to-one mapping.
    if token.isascii():
        return token.lower()
    return "".join(_simple_lower_char(c) for c in token)


@lru_cache(maxsize=4096)
def _simple_lower_char(c: str) -> str:
    low = c.lower()
    # Only multi-codepoint full mappings differ from the simple mapping, and
    # for those the simple mapping is the leading code point (U+0130 -> "i").
    return low[0] if len(low) > 1 else low


_local = threading.local()


def _porter():
    # Snowball stemmer objects keep per-call state; one per thread.
    stemmer = getattr(_local, "porter", None)
    if stemmer is None:
        stemmer = _local.porter = snowballstemmer.stemmer("porter")
    return stemmer


def analyze(text: str, config: AnalyzerConfig | None = None) -> list[str]:
    """Turn text into the token stream both engines index and query with."""
    if config is None:
        config = AnalyzerConfig()
    tokens = _TOKEN_RE.findall(text)
    if config.lowercase:
        tokens = [simple_lower(t) for t in tokens]
    if config.stopwords:
        tokens = [t for t in tokens if t not in config.stopwords]
    if config.stemmer == "porter-english":
        tokens = [s for s in _porter().stemWords(tokens) if s]
    return tokens

"""Scoring parameters, ranked-list types, and the shared ordering rule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple


@dataclass(frozen=True)
class ScoringParams:
    k1: float = 1.2
    b: float = 0.75
    k: int = 20

    def __post_init__(self) -> None:
        if not self.k1 > 0:
            raise ValueError("k1 must be positive")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be at least 1")

    def with_k(self, k: int) -> ScoringParams:
        return ScoringParams(self.k1, self.b, k)


class ScoredDoc(NamedTuple):
    name: str
    score: float


RankedList = list[ScoredDoc]


class CorpusStats(NamedTuple):
    n_docs: int
    avgdl: float


def idf(n_docs: int, df: int) -> float:
    """Lucene-flavoured BM25 idf, natural log."""
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def top_k(scored: Iterable[tuple[str, float]], k: int) -> RankedList:
    """Order by descending score, ties by ascending name, and cut at k."""
    ordered = sorted(scored, key=lambda item: (-item[1], item[0]))
    return [ScoredDoc(name, float(score)) for name, score in ordered[:k]]


def names(ranked: RankedList) -> list[str]:
    return [entry.name for entry in ranked]


def is_well_ordered(ranked: RankedList) -> bool:
    """True when scores never increase and equal scores run in name order."""
    for a, b in zip(ranked, ranked[1:]):
        if a.score < b.score or (a.score == b.score and a.name >= b.name):
            return False
    return len({e.name for e in ranked}) == len(ranked)

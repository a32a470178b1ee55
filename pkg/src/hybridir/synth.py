"""Seeded synthetic corpora and query sets for tests and benchmarks."""

from __future__ import annotations

import numpy as np

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "kr", "pl"]
_VOWELS = ["a", "e", "i", "o", "u", "ei", "au"]


class CorpusGenerator:
    """Documents drawn from a Zipf-distributed vocabulary of pseudo-words."""

    def __init__(self, seed: int = 42, vocab_size: int = 4000, zipf_s: float = 1.05,
                 mean_len: float = 120.0, len_sigma: float = 0.6) -> None:
        self.rng = np.random.default_rng(seed)
        self.vocab = self._vocabulary(vocab_size)
        ranks = np.arange(1, vocab_size + 1, dtype=np.float64)
        weights = ranks ** -zipf_s
        self.probs = weights / weights.sum()
        self.mu = np.log(mean_len) - len_sigma**2 / 2
        self.sigma = len_sigma

    def _vocabulary(self, size: int) -> list[str]:
        words: list[str] = []
        seen: set[str] = set()
        while len(words) < size:
            n = int(self.rng.integers(1, 4))
            w = "".join(
                _ONSETS[self.rng.integers(len(_ONSETS))] + _VOWELS[self.rng.integers(len(_VOWELS))]
                for _ in range(n)
            )
            if w not in seen:
                seen.add(w)
                words.append(w)
        return words

    def text(self, length: int | None = None) -> str:
        if length is None:
            length = max(1, int(self.rng.lognormal(self.mu, self.sigma)))
        idx = self.rng.choice(len(self.vocab), size=length, p=self.probs)
        return " ".join(self.vocab[i] for i in idx)

    def documents(self, n: int, start: int = 0, prefix: str = "doc") -> list[tuple[str, str]]:
        return [(f"{prefix}{i:06d}", self.text()) for i in range(start, start + n)]


def sample_queries(
    docs: list[tuple[str, dict[str, int]]],
    sizes: tuple[int, ...] = (1, 2, 5, 10),
    per_size: int = 10,
    seed: int = 42,
) -> dict[str, list[str]]:
    """Query sets keyed by term count, terms drawn from random documents.

    ``docs`` is (name, term frequencies) for the current corpus. Picking a
    document first and then its terms weights terms by document frequency,
    so queries hit real postings.
    """
    rng = np.random.default_rng(seed)
    docs = sorted(docs, key=lambda d: d[0])
    out: dict[str, list[str]] = {}
    for size in sizes:
        queries = []
        while len(queries) < per_size:
            _, tf = docs[rng.integers(len(docs))]
            terms = sorted(tf)
            if len(terms) < size:
                continue
            pick = rng.choice(len(terms), size=size, replace=False)
            queries.append(" ".join(terms[i] for i in sorted(pick)))
        out[str(size)] = queries
    return out

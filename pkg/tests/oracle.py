"""Brute-force reference implementations used as test oracles.

Nothing here touches the engines' internals: snapshots are plain dicts of
document name -> token list recorded from the ingest history, and every
statistic is recomputed by scanning them.
"""

from __future__ import annotations

import bisect
import math
from functools import lru_cache

from hybridir.analysis import analyze


@lru_cache(maxsize=1)
def _four_bit_values() -> list[int]:
    vals = {m << e for m in range(16) for e in range(32) if (m << e) < 2**32}
    return sorted(vals)


def floor_four_bits(x: int) -> int:
    """Greatest value <= x that needs at most 4 significant bits (by enumeration)."""
    vals = _four_bit_values()
    return vals[bisect.bisect_right(vals, x) - 1]


class History:
    """Shadow copy of the corpus at every timestamp."""

    def __init__(self, analyzer=None):
        self.analyzer = analyzer
        self.snapshots: dict[int, dict[str, list[str]]] = {0: {}}
        self.clock = 0

    def apply(self, docs, deletes=()):
        snap = dict(self.snapshots[self.clock])
        for name, text in docs:
            snap[name] = analyze(text, self.analyzer) if self.analyzer else analyze(text)
        for name in deletes:
            snap.pop(name, None)
        self.clock += 1
        self.snapshots[self.clock] = snap

    def n_docs(self, ts):
        return len(self.snapshots[ts])

    def df(self, term, ts):
        return sum(1 for toks in self.snapshots[ts].values() if term in toks)

    def avgdl(self, ts):
        snap = self.snapshots[ts]
        return sum(len(t) for t in snap.values()) / len(snap) if snap else 0.0

    def terms(self):
        out = set()
        for snap in self.snapshots.values():
            for toks in snap.values():
                out.update(toks)
        return sorted(out)

    def search(self, query, ts, k1=1.2, b=0.75, k=None):
        """Full ranking in double precision, summing once per query-token occurrence."""
        snap = self.snapshots[ts]
        q = analyze(query, self.analyzer) if self.analyzer else analyze(query)
        n = len(snap)
        if not q or n == 0:
            return []
        avgdl = self.avgdl(ts)
        dfs = {t: self.df(t, ts) for t in set(q)}
        scores = {}
        for name, toks in snap.items():
            total, matched = 0.0, False
            dl = floor_four_bits(len(toks))
            for t in q:
                tf = toks.count(t)
                if tf == 0:
                    continue
                matched = True
                idf = math.log(1 + (n - dfs[t] + 0.5) / (dfs[t] + 0.5))
                total += idf * tf / (tf + k1 * (1 - b + b * dl / avgdl))
            if matched:
                scores[name] = total
        ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        return ranked if k is None else ranked[:k]


def same_ranking(got, expected_full, k, eps=1e-4):
    """True if ``got`` equals the oracle's top-k up to adjacent near-tie swaps.

    ``expected_full`` is the untruncated oracle ranking, so a near-tie that
    straddles the cut-off can be accepted.
    """
    exp = [name for name, _ in expected_full]
    score = dict(expected_full)
    names = [e.name for e in got]
    if len(names) != min(k, len(exp)):
        return False
    i = 0
    while i < len(names):
        if names[i] == exp[i]:
            i += 1
            continue
        if i + 1 < len(exp) and names[i] == exp[i + 1] and abs(score[exp[i]] - score[exp[i + 1]]) < eps:
            if i + 1 == len(names) or names[i + 1] == exp[i]:
                i += 2
                continue
        return False
    return True

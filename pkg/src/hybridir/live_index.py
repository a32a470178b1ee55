"""In-memory inverted index serving current-state BM25 queries.

Documents live in integer slots. An update kills the old slot and appends a
fresh one, the way a segment-based engine marks deletions and re-adds the
document; dead slots are purged once they outnumber live ones. Scoring runs
in single precision with a per-query table of length normalizers indexed by
the one-byte length code.
"""

from __future__ import annotations

import sys
from array import array
from collections import Counter
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .analysis import AnalyzerConfig, analyze
from .errors import BatchError
from .ingest import BatchDelta, DocUpdate
from .norms import DECODE_TABLE, encode_len
from .ranking import CorpusStats, RankedList, ScoringParams, idf, top_k

if TYPE_CHECKING:
    from .versioned_store import VersionedStore

_MIN_DEAD_FOR_PURGE = 256


class LiveIndex:
    def __init__(self, analyzer: AnalyzerConfig | None = None) -> None:
        self.analyzer = analyzer or AnalyzerConfig()
        self._reset()

    def _reset(self) -> None:
        self._slot_of: dict[str, int] = {}
        self._names: list[str] = []
        self._lens = array("i")
        self._codes = bytearray()
        self._alive = bytearray()
        # term -> (slots, tfs), parallel int32 buffers in slot order
        self._postings: dict[str, tuple[array, array]] = {}
        self._n_live = 0
        self._total_len = 0

    # -- writes -------------------------------------------------------------

    def upsert_batch(self, docs: Sequence[tuple[str, Sequence[str]]]) -> BatchDelta:
        """Replace or add each document; names must be distinct in the batch."""
        seen: set[str] = set()
        for name, _ in docs:
            if name in seen:
                raise BatchError(f"document {name!r} appears twice in one batch")
            seen.add(name)

        delta = BatchDelta()
        for name, tokens in docs:
            tf = dict(Counter(tokens))
            replaced = self._kill(name)
            length = len(tokens)
            code = encode_len(length)
            self._add(name, tf, length, code)
            delta.upserts.append(DocUpdate(name, tf, length, code, replaced))
        self._maybe_purge()
        return delta

    def delete_doc(self, name: str) -> bool:
        existed = self._kill(name)
        self._maybe_purge()
        return existed

    def _add(self, name: str, tf: dict[str, int], length: int, code: int) -> None:
        slot = len(self._names)
        self._names.append(name)
        self._lens.append(length)
        self._codes.append(code)
        self._alive.append(1)
        self._slot_of[name] = slot
        self._n_live += 1
        self._total_len += length
        for term, count in tf.items():
            bucket = self._postings.get(term)
            if bucket is None:
                bucket = self._postings[term] = (array("i"), array("i"))
            bucket[0].append(slot)
            bucket[1].append(count)

    def _kill(self, name: str) -> bool:
        slot = self._slot_of.pop(name, None)
        if slot is None:
            return False
        self._alive[slot] = 0
        self._n_live -= 1
        self._total_len -= self._lens[slot]
        return True

    def _maybe_purge(self) -> None:
        dead = len(self._names) - self._n_live
        if dead >= _MIN_DEAD_FOR_PURGE and dead > self._n_live:
            self.purge()

    def purge(self) -> None:
        """Drop dead slots and renumber the survivors, keeping their order."""
        alive = np.frombuffer(self._alive, dtype=np.uint8).astype(bool)
        remap = np.cumsum(alive, dtype=np.int64) - 1
        keep = np.flatnonzero(alive)
        names = [self._names[i] for i in keep]
        lens = array("i", (self._lens[i] for i in keep))
        codes = bytearray(self._codes[i] for i in keep)
        postings: dict[str, tuple[array, array]] = {}
        for term, (slots, tfs) in self._postings.items():
            s = np.frombuffer(slots, dtype=np.int32)
            m = alive[s]
            if not m.any():
                continue
            postings[term] = (
                array("i", remap[s[m]].astype(np.int32).tobytes()),
                array("i", np.frombuffer(tfs, dtype=np.int32)[m].tobytes()),
            )
        self._names = names
        self._lens = lens
        self._codes = codes
        self._alive = bytearray(b"\x01" * len(names))
        self._slot_of = {name: i for i, name in enumerate(names)}
        self._postings = postings

    def rebuild_from(self, store: VersionedStore) -> None:
        """Reload from the versions valid at the store's clock."""
        self._reset()
        for name, tf, length, code in store.documents_at(store.clock):
            self._add(name, tf, length, code)

    # -- reads --------------------------------------------------------------

    def current_stats(self) -> CorpusStats:
        if self._n_live == 0:
            return CorpusStats(0, 0.0)
        return CorpusStats(self._n_live, self._total_len / self._n_live)

    def __contains__(self, name: str) -> bool:
        return name in self._slot_of

    def __len__(self) -> int:
        return self._n_live

    def doc_names(self) -> list[str]:
        return sorted(self._slot_of)

    def doc_entry(self, name: str) -> tuple[int, int]:
        """(exact_len, approx_len_code) of the current revision."""
        slot = self._slot_of[name]
        return self._lens[slot], self._codes[slot]

    def total_tokens(self) -> int:
        return self._total_len

    def terms(self) -> Iterable[str]:
        return self._postings.keys()

    def df(self, term: str) -> int:
        bucket = self._postings.get(term)
        if bucket is None:
            return 0
        alive = np.frombuffer(self._alive, dtype=np.uint8)
        return int(alive[np.frombuffer(bucket[0], dtype=np.int32)].sum())

    def postings(self, term: str) -> dict[str, int]:
        """Live postings of a term as name -> tf."""
        bucket = self._postings.get(term)
        if bucket is None:
            return {}
        return {
            self._names[s]: tf
            for s, tf in zip(bucket[0], bucket[1])
            if self._alive[s]
        }

    def search(self, query: str, params: ScoringParams | None = None) -> RankedList:
        params = params or ScoringParams()
        counts = Counter(analyze(query, self.analyzer))
        n_docs, avgdl = self.current_stats()
        if not counts or n_docs == 0 or avgdl == 0.0:
            return []

        # length normalizer per length code, rounded once to float32
        norm = (params.k1 * (1.0 - params.b + params.b * DECODE_TABLE / avgdl)).astype(np.float32)
        alive = np.frombuffer(self._alive, dtype=np.uint8).astype(bool)
        codes = np.frombuffer(self._codes, dtype=np.uint8).copy()
        acc = np.zeros(len(self._names), dtype=np.float32)
        hit = np.zeros(len(self._names), dtype=bool)

        for term, qtf in counts.items():
            bucket = self._postings.get(term)
            if bucket is None:
                continue
            slots = np.frombuffer(bucket[0], dtype=np.int32)
            live = alive[slots]
            slots = slots[live]
            df = len(slots)
            if df == 0:
                continue
            tf = np.frombuffer(bucket[1], dtype=np.int32)[live].astype(np.float32)
            weight = np.float32(idf(n_docs, df)) * (tf / (tf + norm[codes[slots]]))
            if qtf != 1:
                weight *= np.float32(qtf)
            acc[slots] += weight
            hit[slots] = True

        cand = np.flatnonzero(hit)
        if len(cand) > params.k:
            scores = acc[cand]
            kth = np.partition(scores, len(scores) - params.k)[len(scores) - params.k]
            cand = cand[scores >= kth]
        return top_k(((self._names[i], float(acc[i])) for i in cand), params.k)

    def memory_bytes(self) -> int:
        """Approximate resident size of the index structures."""
        size = sys.getsizeof(self._postings) + sys.getsizeof(self._slot_of)
        for term, bucket in self._postings.items():
            size += sys.getsizeof(term) + sys.getsizeof(bucket)
            size += sys.getsizeof(bucket[0]) + sys.getsizeof(bucket[1])
        size += sys.getsizeof(self._names) + sum(sys.getsizeof(n) for n in self._names)
        size += sys.getsizeof(self._lens) + sys.getsizeof(self._codes) + sys.getsizeof(self._alive)
        return size

"""Interval-versioned columnar store of documents and term postings.

Every document revision is an immutable row carrying a half-open validity
interval ``[valid_from, valid_to)`` on the logical batch clock. Postings
belong to a revision and inherit its validity. Corpus statistics (N, df,
avgdl) are never stored; they are recomputed from the columns for whatever
timestamp a query asks about, which is what makes old rankings
reproducible after the corpus has moved on.

Postings are kept twice in memory: in log order (as appended, grouped by
version) and clustered by term id with a ``term_id -> [start, end)``
directory. The clustered copy is re-merged after every batch.
"""

from __future__ import annotations

import logging
from array import array
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterator

import numpy as np

from .analysis import AnalyzerConfig, analyze
from .errors import BatchError, FutureTimestampError
from .ingest import BatchDelta
from .norms import DECODE_TABLE
from .ranking import CorpusStats, RankedList, ScoringParams, idf, top_k

logger = logging.getLogger(__name__)

OPEN = np.iinfo(np.int64).max


@dataclass(frozen=True)
class DocumentVersion:
    version_id: int
    name: str
    valid_from: int
    valid_to: int | None
    exact_len: int
    approx_len_code: int


def valid_at(v: DocumentVersion, ts: int) -> bool:
    return v.valid_from <= ts and (v.valid_to is None or v.valid_to > ts)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class VersionedStore:
    def __init__(self, analyzer: AnalyzerConfig | None = None) -> None:
        self.analyzer = analyzer or AnalyzerConfig()
        self.clock = 0
        self.wall_clock: dict[int, str] = {}

        # Documents relation
        self._v_name: list[str] = []
        self._v_from = array("q")
        self._v_to = array("q")  # OPEN while the version is current
        self._v_len = array("q")
        self._v_code = bytearray()
        self._v_post_start = array("q")  # first row of this version in the postings log
        self._open: dict[str, int] = {}

        # Dict relation
        self._terms: list[str] = []
        self._tid: dict[str, int] = {}

        # Terms relation, log order
        self._p_tid = array("q")
        self._p_vid = array("q")
        self._p_tf = array("q")

        self._undo: tuple | None = None
        self._refresh()

    # -- sizes --------------------------------------------------------------

    @property
    def version_count(self) -> int:
        return len(self._v_name)

    @property
    def posting_count(self) -> int:
        return len(self._p_tid)

    @property
    def term_count(self) -> int:
        return len(self._terms)

    # -- writes -------------------------------------------------------------

    def apply_batch(self, delta: BatchDelta, ts: int) -> None:
        """Close superseded versions at ``ts`` and append the new ones.

        Everything is checked before the first row is touched; if something
        still fails halfway, the partial batch is undone.
        """
        if not isinstance(delta, BatchDelta):
            raise BatchError(f"expected a BatchDelta, got {type(delta).__name__}")
        if ts != self.clock + 1:
            raise BatchError(f"out-of-order timestamp {ts}, clock is {self.clock}")
        delta.validate()
        for u in delta.upserts:
            if u.replaced != (u.name in self._open):
                raise BatchError(
                    f"delta says {u.name!r} replaced={u.replaced}, store disagrees"
                )
        for name in delta.deletes:
            if name not in self._open:
                raise BatchError(f"delete of {name!r}, which has no current version")

        self._undo = (ts, self.version_count, self.posting_count, self.term_count, [])
        closed: list[tuple[str, int]] = self._undo[4]
        try:
            for name in [u.name for u in delta.upserts if u.replaced] + list(delta.deletes):
                vid = self._open.pop(name)
                self._v_to[vid] = ts
                closed.append((name, vid))
            intern = self._intern
            for u in delta.upserts:
                vid = self._append_version(u.name, ts, u.exact_len, u.approx_len_code)
                self._p_tid.extend([intern(term) for term in u.tf])
                self._p_vid.extend([vid] * len(u.tf))
                self._p_tf.extend(u.tf.values())
            self.clock = ts
            self.wall_clock[ts] = _now()
            self._refresh()
        except BaseException:
            self.rollback_last()
            raise

    def rollback_last(self) -> None:
        """Undo the most recent apply_batch; only valid once per batch."""
        if self._undo is None:
            raise RuntimeError("nothing to roll back")
        ts, n_versions, n_postings, n_terms, closed = self._undo
        self._undo = None
        for name in self._v_name[n_versions:]:
            if self._open.get(name, -1) >= n_versions:
                del self._open[name]
        del self._v_name[n_versions:]
        for col in (self._v_from, self._v_to, self._v_len, self._v_post_start):
            del col[n_versions:]
        del self._v_code[n_versions:]
        for col in (self._p_tid, self._p_vid, self._p_tf):
            del col[n_postings:]
        for term in self._terms[n_terms:]:
            del self._tid[term]
        del self._terms[n_terms:]
        for name, vid in closed:
            self._v_to[vid] = OPEN
            self._open[name] = vid
        if self.clock == ts:
            self.clock = ts - 1
            self.wall_clock.pop(ts, None)
        self._refresh()

    def _append_version(self, name: str, valid_from: int, length: int, code: int) -> int:
        vid = len(self._v_name)
        self._v_name.append(name)
        self._v_from.append(valid_from)
        self._v_to.append(OPEN)
        self._v_len.append(length)
        self._v_code.append(code)
        self._v_post_start.append(len(self._p_tid))
        self._open[name] = vid
        return vid

    def _append_posting(self, tid: int, vid: int, tf: int) -> None:
        self._p_tid.append(tid)
        self._p_vid.append(vid)
        self._p_tf.append(tf)

    def _intern(self, term: str) -> int:
        tid = self._tid.get(term)
        if tid is None:
            tid = self._tid[term] = len(self._terms)
            self._terms.append(term)
        return tid

    # -- replay (used by storage on open) -------------------------------------

    def load_term(self, tid: int, term: str) -> None:
        if tid != len(self._terms) or term in self._tid:
            raise ValueError(f"dictionary entry {tid}:{term!r} out of sequence")
        self._intern(term)

    def load_version(self, vid: int, name: str, valid_from: int, length: int, code: int) -> None:
        if vid != len(self._v_name):
            raise ValueError(f"version id {vid} out of sequence")
        if name in self._open:
            raise ValueError(f"second open version for {name!r}")
        self._append_version(name, valid_from, length, code)

    def load_close(self, vid: int, valid_to: int) -> None:
        if not 0 <= vid < len(self._v_name) or self._v_to[vid] != OPEN:
            raise ValueError(f"close of version {vid} which is not open")
        if valid_to <= self._v_from[vid]:
            raise ValueError(f"close of version {vid} at {valid_to} precedes its start")
        self._v_to[vid] = valid_to
        del self._open[self._v_name[vid]]

    def load_posting(self, tid: int, vid: int, tf: int) -> None:
        if not 0 <= tid < len(self._terms) or not 0 <= vid < len(self._v_name) or tf < 1:
            raise ValueError(f"posting ({tid}, {vid}, {tf}) is invalid")
        if len(self._p_vid) and vid < self._p_vid[-1]:
            raise ValueError(f"posting for version {vid} out of order")
        self._append_posting(tid, vid, tf)

    def finish_load(self, clock: int, wall_clock: dict[int, str] | None = None) -> None:
        self.clock = clock
        self.wall_clock = dict(wall_clock or {})
        # postings of a version are contiguous in the log; recompute starts
        starts = np.searchsorted(
            np.array(self._p_vid, dtype=np.int64), np.arange(len(self._v_name), dtype=np.int64)
        )
        self._v_post_start = array("q", starts.astype(np.int64).tobytes())
        self._refresh()

    # -- derived columns ------------------------------------------------------

    def _refresh(self) -> None:
        # copies, not views: the source arrays must stay resizable
        self._from_np = np.array(self._v_from, dtype=np.int64)
        self._to_np = np.array(self._v_to, dtype=np.int64)
        self._len_np = np.array(self._v_len, dtype=np.int64)
        self._code_np = np.frombuffer(bytes(self._v_code), dtype=np.uint8)
        tids = np.array(self._p_tid, dtype=np.int64)
        order = np.argsort(tids, kind="stable")
        self._c_vid = np.array(self._p_vid, dtype=np.int64)[order]
        self._c_tf = np.array(self._p_tf, dtype=np.int64)[order]
        self._c_start = np.searchsorted(
            tids[order], np.arange(len(self._terms) + 1, dtype=np.int64)
        )

    # -- time-filtered reads --------------------------------------------------

    def _check_ts(self, ts: int) -> None:
        if ts > self.clock:
            raise FutureTimestampError(ts, self.clock)
        if ts < 0:
            raise ValueError(f"negative timestamp {ts}")

    def _valid_mask(self, ts: int) -> np.ndarray:
        return (self._from_np <= ts) & (self._to_np > ts)

    def _rows(self, term: str) -> tuple[np.ndarray, np.ndarray]:
        tid = self._tid.get(term)
        if tid is None:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        lo, hi = self._c_start[tid], self._c_start[tid + 1]
        return self._c_vid[lo:hi], self._c_tf[lo:hi]

    def n_docs_at(self, ts: int) -> int:
        self._check_ts(ts)
        return int(self._valid_mask(ts).sum())

    def df_at(self, term: str, ts: int) -> int:
        self._check_ts(ts)
        vids, _ = self._rows(term)
        return int(self._valid_mask(ts)[vids].sum())

    def avgdl_at(self, ts: int) -> float:
        self._check_ts(ts)
        lens = self._len_np[self._valid_mask(ts)]
        return float(lens.mean()) if len(lens) else 0.0

    def stats_at(self, ts: int) -> CorpusStats:
        self._check_ts(ts)
        lens = self._len_np[self._valid_mask(ts)]
        return CorpusStats(len(lens), float(lens.mean()) if len(lens) else 0.0)

    def search_at(self, query: str, ts: int, params: ScoringParams | None = None) -> RankedList:
        """BM25 over the corpus as it stood at ``ts``, in double precision."""
        params = params or ScoringParams()
        self._check_ts(ts)
        counts = Counter(analyze(query, self.analyzer))
        if not counts:
            return []
        valid = self._valid_mask(ts)
        lens = self._len_np[valid]
        n_docs = len(lens)
        if n_docs == 0:
            return []
        avgdl = float(lens.mean())
        if avgdl == 0.0:
            return []

        acc = np.zeros(self.version_count, dtype=np.float64)
        hit = np.zeros(self.version_count, dtype=bool)
        for term, qtf in counts.items():
            vids, tfs = self._rows(term)
            keep = valid[vids]
            vids = vids[keep]
            df = len(vids)
            if df == 0:
                continue
            tf = tfs[keep].astype(np.float64)
            dl = DECODE_TABLE[self._code_np[vids]]
            tfnorm = tf / (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl))
            acc[vids] += idf(n_docs, df) * tfnorm * qtf
            hit[vids] = True

        return top_k(((self._v_name[v], acc[v]) for v in np.flatnonzero(hit)), params.k)

    def documents_at(self, ts: int) -> Iterator[tuple[str, dict[str, int], int, int]]:
        """(name, term frequencies, exact_len, code) for every version valid at ts."""
        self._check_ts(ts)
        n_post = len(self._p_tid)
        for vid in np.flatnonzero(self._valid_mask(ts)):
            vid = int(vid)
            lo = self._v_post_start[vid]
            hi = self._v_post_start[vid + 1] if vid + 1 < len(self._v_name) else n_post
            tf = {self._terms[self._p_tid[i]]: self._p_tf[i] for i in range(lo, hi)}
            yield self._v_name[vid], tf, self._v_len[vid], self._v_code[vid]

    # -- raw relations ----------------------------------------------------------

    def version(self, vid: int) -> DocumentVersion:
        to = self._v_to[vid]
        return DocumentVersion(
            vid,
            self._v_name[vid],
            self._v_from[vid],
            None if to == OPEN else to,
            self._v_len[vid],
            self._v_code[vid],
        )

    def versions(self) -> Iterator[DocumentVersion]:
        for vid in range(len(self._v_name)):
            yield self.version(vid)

    def versions_of(self, name: str) -> list[DocumentVersion]:
        return [v for v in self.versions() if v.name == name]

    def dict_entries(self) -> list[tuple[int, str]]:
        return list(enumerate(self._terms))

    def term_id(self, term: str) -> int | None:
        return self._tid.get(term)

    def postings_log(self) -> Iterator[tuple[int, int, int]]:
        return zip(self._p_tid, self._p_vid, self._p_tf)

    def postings_since(self, row: int) -> Iterator[tuple[int, int, int]]:
        return zip(self._p_tid[row:], self._p_vid[row:], self._p_tf[row:])

    def closed_at(self, ts: int) -> list[int]:
        """Version ids whose validity ended at ts."""
        return np.flatnonzero(self._to_np == ts).tolist()

    def check_invariants(self) -> list[str]:
        """Full scan of the version chain and postings; returns the violations."""
        problems: list[str] = []
        by_name: dict[str, list[DocumentVersion]] = {}
        for v in self.versions():
            by_name.setdefault(v.name, []).append(v)
            if v.valid_from > self.clock or (v.valid_to is not None and v.valid_to > self.clock):
                problems.append(f"version {v.version_id} extends past clock {self.clock}")
            if v.valid_to is not None and v.valid_to <= v.valid_from:
                problems.append(f"version {v.version_id} has empty interval")
        for name, chain in by_name.items():
            if sum(v.valid_to is None for v in chain) > 1:
                problems.append(f"{name!r} has more than one open version")
            chain = sorted(chain, key=lambda v: v.valid_from)
            for a, b in zip(chain, chain[1:]):
                if a.valid_to is None or a.valid_to > b.valid_from:
                    problems.append(f"{name!r} versions {a.version_id} and {b.version_id} overlap")
            if chain[-1].valid_to is None and self._open.get(name) != chain[-1].version_id:
                problems.append(f"{name!r} open-version directory is stale")
        seen: set[tuple[int, int]] = set()
        lengths = Counter()
        for tid, vid, tf in self.postings_log():
            if (tid, vid) in seen:
                problems.append(f"duplicate posting ({tid}, {vid})")
            seen.add((tid, vid))
            if tf < 1:
                problems.append(f"posting ({tid}, {vid}) has tf {tf}")
            lengths[vid] += tf
        for v in self.versions():
            if lengths[v.version_id] != v.exact_len:
                problems.append(f"version {v.version_id} length {v.exact_len} != sum of tf")
        return problems

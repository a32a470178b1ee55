"""Batch ingestion through both engines.

A batch is analyzed once, applied to the live index, translated into a
:class:`BatchDelta`, and synchronized into the versioned store at
``clock + 1``. If any stage fails, both engines are put back to the state
they had before the batch and the clock does not move.
"""

from __future__ import annotations

import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

from .analysis import AnalyzerConfig, analyze
from .errors import BatchError

if TYPE_CHECKING:
    from .live_index import LiveIndex
    from .versioned_store import VersionedStore

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DocUpdate:
    name: str
    tf: dict[str, int]
    exact_len: int
    approx_len_code: int
    replaced: bool


@dataclass
class BatchDelta:
    upserts: list[DocUpdate] = field(default_factory=list)
    deletes: list[str] = field(default_factory=list)
    ts: int | None = None

    def validate(self) -> None:
        seen: set[str] = set()
        for name in [u.name for u in self.upserts] + list(self.deletes):
            if not isinstance(name, str) or not name:
                raise BatchError(f"invalid document name {name!r}")
            if name in seen:
                raise BatchError(f"document {name!r} appears twice in one batch")
            seen.add(name)
        for u in self.upserts:
            if u.tf and min(u.tf.values()) < 1:
                raise BatchError(f"non-positive term frequency in {u.name!r}")
            if sum(u.tf.values()) != u.exact_len:
                raise BatchError(f"length of {u.name!r} disagrees with its term frequencies")


@dataclass(frozen=True)
class BatchStats:
    ts: int
    docs_in: int
    live_ms: float
    sync_ms: float
    cumulative_docs: int


def term_frequencies(tokens: Sequence[str]) -> dict[str, int]:
    return dict(Counter(tokens))


def ingest_batch(
    live: LiveIndex,
    store: VersionedStore,
    analyzer: AnalyzerConfig,
    docs: Sequence[tuple[str, str]],
    deletes: Sequence[str] = (),
    commit: Callable[[BatchDelta, BatchStats], None] | None = None,
) -> BatchStats:
    """Push one batch through both engines and advance the clock once.

    ``commit`` is the durability hook; it runs after both engines are
    updated, and an exception from it rolls the batch back like any other
    engine failure.
    """
    names = [name for name, _ in docs] + list(deletes)
    dupes = [n for n, c in Counter(names).items() if c > 1]
    if dupes:
        raise BatchError(f"duplicate document names in batch: {sorted(dupes)[:5]}")
    if any(not isinstance(n, str) or not n for n in names):
        raise BatchError("document names must be non-empty strings")

    ts = store.clock + 1
    t0 = time.perf_counter()
    analyzed = [(name, analyze(text, analyzer)) for name, text in docs]
    try:
        delta = live.upsert_batch(analyzed)
        for name in deletes:
            if live.delete_doc(name):
                delta.deletes.append(name)
            else:
                logger.warning("delete of unknown document %r ignored", name)
        delta.ts = ts
        live_ms = (time.perf_counter() - t0) * 1000.0

        t1 = time.perf_counter()
        store.apply_batch(delta, ts)
        sync_ms = (time.perf_counter() - t1) * 1000.0
    except BaseException:
        if store.clock == ts:
            store.rollback_last()
        live.rebuild_from(store)
        raise

    stats = BatchStats(
        ts=ts,
        docs_in=len(docs),
        live_ms=live_ms,
        sync_ms=sync_ms,
        cumulative_docs=store.version_count,
    )
    if commit is not None:
        try:
            commit(delta, stats)
        except BaseException:
            store.rollback_last()
            live.rebuild_from(store)
            raise
    return stats

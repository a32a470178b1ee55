"""The hybrid system: live index, versioned store, query table, storage."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

from .analysis import AnalyzerConfig
from .errors import FutureTimestampError
from .ingest import BatchStats, ingest_batch
from .live_index import LiveIndex
from .query_store import QueryStore
from .ranking import RankedList, ScoringParams
from .reproducer import DEFAULT_EPSILON, ResolveReport, resolve, time_travel_search
from .storage import Manifest, Storage
from .versioned_store import VersionedStore

logger = logging.getLogger(__name__)


class HybridSystem:
    """Both engines plus the query table, optionally backed by a directory.

    Without ``root`` everything stays in memory, which is what most tests use.
    """

    def __init__(
        self,
        analyzer: AnalyzerConfig | None = None,
        params: ScoringParams | None = None,
        root: str | Path | None = None,
    ) -> None:
        self.analyzer = analyzer or AnalyzerConfig()
        self.params = params or ScoringParams()
        self.live = LiveIndex(self.analyzer)
        self.store = VersionedStore(self.analyzer)
        self.queries = QueryStore()
        self.storage: Storage | None = None
        self.manifest: Manifest | None = None
        if root is not None:
            self.storage = Storage(root)
            self.manifest = Manifest.fresh(self.analyzer, self.params)

    @classmethod
    def open(
        cls,
        root: str | Path,
        analyzer: AnalyzerConfig | None = None,
        params: ScoringParams | None = None,
    ) -> HybridSystem:
        """Open a store directory, creating it when it has no manifest.

        An existing store keeps the analyzer it was created with; passing a
        different one is an error.
        """
        storage = Storage(root)
        if not storage.exists():
            system = cls(analyzer, params, root)
            storage.initialize(system.manifest)
            return system

        manifest = storage.read_manifest()
        stored = manifest.analyzer_config()
        if analyzer is not None and analyzer.digest() != stored.digest():
            raise ValueError("analyzer differs from the one this store was created with")
        system = cls(stored, manifest.scoring_params(), root)
        system.manifest = manifest
        storage.replay(manifest, system.store, system.queries)
        system.live.rebuild_from(system.store)
        return system

    @property
    def clock(self) -> int:
        return self.store.clock

    def _params(self, k: int | None) -> ScoringParams:
        return self.params if k is None else self.params.with_k(k)

    # -- writes -------------------------------------------------------------

    def ingest_batch(self, docs: Sequence[tuple[str, str]], deletes: Sequence[str] = ()) -> BatchStats:
        return ingest_batch(self.live, self.store, self.analyzer, docs, deletes,
                            self._commit if self.storage is not None else None)

    def _commit(self, delta, stats: BatchStats) -> None:
        self.storage.commit_batch(self.manifest, self.store, delta, stats)

    def register(
        self,
        query: str,
        k: int,
        exec_ts: int,
        ranked: RankedList,
        creator: str | None = None,
        description: str | None = None,
    ) -> str:
        if exec_ts > self.clock:
            raise FutureTimestampError(exec_ts, self.clock)
        pid, is_new = self.queries.register(query, k, exec_ts, ranked, creator, description)
        if is_new and self.storage is not None:
            self.storage.commit_query(self.manifest, self.queries.get(pid))
        return pid

    def cite(
        self,
        query: str,
        k: int | None = None,
        creator: str | None = None,
        description: str | None = None,
    ) -> str:
        """Run a live search at the current clock and mint a pid for its result."""
        params = self._params(k)
        ranked = self.live.search(query, params)
        return self.register(query, params.k, self.clock, ranked, creator, description)

    # -- reads --------------------------------------------------------------

    def search(self, query: str, k: int | None = None) -> RankedList:
        return self.live.search(query, self._params(k))

    def search_at(self, query: str, ts: int, k: int | None = None) -> RankedList:
        return self.store.search_at(query, ts, self._params(k))

    def time_travel_search(self, query: str, ts: int | None = None, k: int | None = None) -> RankedList:
        return time_travel_search(self.store, query, ts, self._params(k))

    def resolve(self, pid: str, epsilon: float = DEFAULT_EPSILON) -> ResolveReport:
        return resolve(self.store, self.queries, pid, self.params, epsilon)

    def verify(self) -> list[str]:
        """Re-check store invariants and live/versioned agreement at the clock."""
        problems = self.store.check_invariants()
        ts = self.clock
        n_docs, avgdl = self.live.current_stats()
        if n_docs != self.store.n_docs_at(ts):
            problems.append(f"live N {n_docs} != versioned N {self.store.n_docs_at(ts)}")
        if abs(avgdl - self.store.avgdl_at(ts)) > 1e-9 * max(1.0, avgdl):
            problems.append(f"live avgdl {avgdl} != versioned {self.store.avgdl_at(ts)}")
        for term in list(self.live.terms()):
            live_df = self.live.df(term)
            if live_df and live_df != self.store.df_at(term, ts):
                problems.append(f"df({term!r}) live {live_df} != versioned {self.store.df_at(term, ts)}")
        for record in self.queries:
            if record.exec_ts > ts:
                problems.append(f"{record.pid} executed after the clock")
        return problems

    def footprint(self) -> dict[str, int]:
        sizes = self.storage.footprint() if self.storage is not None else {}
        sizes["store_bytes"] = self.storage.store_bytes() if self.storage is not None else 0
        sizes["live_index_bytes"] = self.live.memory_bytes()
        return sizes

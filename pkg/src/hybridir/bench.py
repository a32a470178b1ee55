"""Per-batch measurements of both engines: timing, score agreement, footprint."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .errors import AmbiguousTieError
from .ingest import BatchStats
from .query_store import canonical_hash
from .ranking import RankedList, names
from .reproducer import DEFAULT_EPSILON, correct_ties
from .synth import sample_queries
from .system import HybridSystem


@dataclass
class BenchRow:
    ts: int
    cum_docs: int
    live_ms: float
    sync_ms: float
    qset: str
    live_q_ms: float
    vcbr_q_ms: float
    max_score_diff: float
    mean_consec_gap: float
    rank_mismatches: int
    corrections: int
    store_bytes: int
    live_index_bytes: int


CSV_COLUMNS = tuple(f.name for f in fields(BenchRow))


@dataclass
class Comparison:
    max_score_diff: float
    mismatch: bool
    corrected: bool


def compare_lists(live: RankedList, vcbr: RankedList, k: int, epsilon: float = DEFAULT_EPSILON) -> Comparison:
    """Compare a live top-k list with a versioned list holding up to k+1 entries."""
    vscore = {e.name: e.score for e in vcbr}
    diffs = [abs(e.score - vscore[e.name]) for e in live if e.name in vscore]
    max_diff = max(diffs, default=0.0)
    if names(live) == names(vcbr[:k]):
        return Comparison(max_diff, False, False)
    try:
        fixed = correct_ties(vcbr, canonical_hash(live), epsilon, k=k)
    except AmbiguousTieError:
        fixed = None
    return Comparison(max_diff, True, fixed is not None)


def mean_consecutive_gap(ranked: RankedList) -> float | None:
    if len(ranked) < 2:
        return None
    return (ranked[0].score - ranked[-1].score) / (len(ranked) - 1)


def default_query_sets(system: HybridSystem, seed: int = 42, per_size: int = 10) -> dict[str, list[str]]:
    docs = [(name, tf) for name, tf, _, _ in system.store.documents_at(system.clock)]
    return sample_queries(docs, per_size=per_size, seed=seed)


def measure(
    system: HybridSystem,
    stats: BatchStats,
    query_sets: dict[str, Sequence[str]],
    epsilon: float = DEFAULT_EPSILON,
) -> list[BenchRow]:
    """Run every query set on both engines at the current clock."""
    k = system.params.k
    live_params = system.params
    vcbr_params = system.params.with_k(k + 1)
    footprint = system.footprint()
    rows = []
    for qset, queries in query_sets.items():
        live_t = vcbr_t = 0.0
        max_diff = 0.0
        gaps: list[float] = []
        mismatches = corrections = 0
        for q in queries:
            t0 = time.perf_counter()
            live = system.live.search(q, live_params)
            t1 = time.perf_counter()
            vcbr = system.store.search_at(q, system.clock, vcbr_params)
            t2 = time.perf_counter()
            live_t += t1 - t0
            vcbr_t += t2 - t1
            cmp = compare_lists(live, vcbr, k, epsilon)
            max_diff = max(max_diff, cmp.max_score_diff)
            mismatches += cmp.mismatch
            corrections += cmp.corrected
            gap = mean_consecutive_gap(vcbr[:k])
            if gap is not None:
                gaps.append(gap)
        n = max(len(queries), 1)
        rows.append(BenchRow(
            ts=stats.ts,
            cum_docs=stats.cumulative_docs,
            live_ms=stats.live_ms,
            sync_ms=stats.sync_ms,
            qset=qset,
            live_q_ms=live_t * 1000.0 / n,
            vcbr_q_ms=vcbr_t * 1000.0 / n,
            max_score_diff=max_diff,
            mean_consec_gap=sum(gaps) / len(gaps) if gaps else 0.0,
            rank_mismatches=mismatches,
            corrections=corrections,
            store_bytes=footprint["store_bytes"],
            live_index_bytes=footprint["live_index_bytes"],
        ))
    return rows


def write_csv(path: str | Path, rows: Iterable[BenchRow], append: bool = False) -> None:
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        if new:
            writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(_fmt(v) for v in astuple(row))


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def _fmt(value: object) -> object:
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite bench value {value}")
        return f"{value:.6g}" if value else "0"
    return value


def parse_queries_file(path: str | Path) -> dict[str, list[str]]:
    """One query per line; an optional ``tag|`` prefix names its query set."""
    sets: dict[str, list[str]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        tag, sep, query = line.partition("|")
        if not sep:
            tag, query = "all", line
        sets.setdefault(tag.strip(), []).append(query.strip())
    if not sets:
        raise ValueError(f"no queries in {path}")
    return sets

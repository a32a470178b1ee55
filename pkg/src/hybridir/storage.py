"""Append-only on-disk persistence for the versioned store and query table.

Layout of a store directory::

    manifest.json    commit point: clock, analyzer, scoring, record counts
    dict.jsonl       {"tid": int, "term": str}
    docs.jsonl       {"vid", "name", "from", "len", "alen"} or {"close": vid, "to": int}
    postings.jsonl   {"tid": int, "vid": int, "tf": int}
    queries.jsonl    one query record per line

Logs are appended and fsynced first; the manifest is then replaced
atomically. On open, a log shorter than the manifest says is corrupt, while
lines past the committed count are an interrupted write and get cut off.
The live index is never written; it is rebuilt from the versioned store.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterator

from .analysis import AnalyzerConfig
from .errors import CorruptStoreError
from .ingest import BatchDelta, BatchStats
from .query_store import QueryRecord, QueryStore
from .ranking import ScoringParams
from .versioned_store import VersionedStore

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
DICT_LOG = "dict.jsonl"
DOCS_LOG = "docs.jsonl"
POSTINGS_LOG = "postings.jsonl"
QUERIES_LOG = "queries.jsonl"
LOGS = (DICT_LOG, DOCS_LOG, POSTINGS_LOG, QUERIES_LOG)
STORE_LOGS = (DICT_LOG, DOCS_LOG, POSTINGS_LOG)


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


@dataclass
class Manifest:
    clock: int = 0
    analyzer: dict[str, Any] = field(default_factory=lambda: AnalyzerConfig().to_dict())
    analyzer_digest: str = field(default_factory=lambda: AnalyzerConfig().digest())
    scoring: dict[str, Any] = field(default_factory=lambda: asdict(ScoringParams()))
    counts: dict[str, int] = field(
        default_factory=lambda: {"dict_entries": 0, "versions": 0, "closes": 0, "postings": 0, "queries": 0}
    )
    batches: list[dict[str, Any]] = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    @classmethod
    def fresh(cls, analyzer: AnalyzerConfig, params: ScoringParams) -> Manifest:
        return cls(analyzer=analyzer.to_dict(), analyzer_digest=analyzer.digest(), scoring=asdict(params))

    def analyzer_config(self) -> AnalyzerConfig:
        return AnalyzerConfig.from_dict(self.analyzer)

    def scoring_params(self) -> ScoringParams:
        return ScoringParams(**self.scoring)

    def expected_lines(self) -> dict[str, int]:
        c = self.counts
        return {
            DICT_LOG: c["dict_entries"],
            DOCS_LOG: c["versions"] + c["closes"],
            POSTINGS_LOG: c["postings"],
            QUERIES_LOG: c["queries"],
        }


class Storage:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def exists(self) -> bool:
        return (self.root / MANIFEST).exists()

    def initialize(self, manifest: Manifest) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        for name in LOGS:
            (self.root / name).touch()
        self.write_manifest(manifest)

    # -- manifest -------------------------------------------------------------

    def read_manifest(self) -> Manifest:
        path = self.root / MANIFEST
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            manifest = Manifest(**data)
        except (OSError, ValueError, TypeError) as exc:
            raise CorruptStoreError(str(path), None, f"unreadable manifest ({exc})") from exc
        if manifest.format_version != FORMAT_VERSION:
            raise CorruptStoreError(str(path), None, f"unsupported format {manifest.format_version}")
        if AnalyzerConfig.from_dict(manifest.analyzer).digest() != manifest.analyzer_digest:
            raise CorruptStoreError(str(path), None, "analyzer digest mismatch")
        return manifest

    def write_manifest(self, manifest: Manifest) -> None:
        path = self.root / MANIFEST
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(asdict(manifest), f, ensure_ascii=False, indent=1)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
        _fsync_dir(self.root)

    # -- reading --------------------------------------------------------------

    def _records(self, name: str, expected: int) -> Iterator[tuple[int, dict[str, Any]]]:
        """Yield (line number, record) for the committed prefix of a log."""
        path = self.root / name
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise CorruptStoreError(str(path), None, f"missing log ({exc})") from exc
        lines = raw.split(b"\n")
        complete = len(lines) - 1  # the piece after the last LF is unfinished
        if complete < expected:
            raise CorruptStoreError(
                str(path), complete + 1, f"manifest commits {expected} records, log holds {complete}"
            )
        if complete > expected or lines[-1]:
            # interrupted append after the last commit
            keep = sum(len(line) + 1 for line in lines[:expected])
            with open(path, "r+b") as f:
                f.truncate(keep)
                os.fsync(f.fileno())
        for lineno, line in enumerate(lines[:expected], start=1):
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError("record is not an object")
            except ValueError as exc:
                raise CorruptStoreError(str(path), lineno, f"bad record ({exc})") from exc
            yield lineno, record

    def replay(self, manifest: Manifest, store: VersionedStore, queries: QueryStore) -> None:
        """Rebuild the versioned store and query table from the committed logs."""
        expected = manifest.expected_lines()
        steps = (
            (DICT_LOG, lambda r: store.load_term(r["tid"], r["term"])),
            (DOCS_LOG, lambda r: store.load_close(r["close"], r["to"]) if "close" in r
             else store.load_version(r["vid"], r["name"], r["from"], r["len"], r["alen"])),
            (POSTINGS_LOG, lambda r: store.load_posting(r["tid"], r["vid"], r["tf"])),
            (QUERIES_LOG, lambda r: queries.load(QueryRecord.from_dict(r))),
        )
        for name, apply in steps:
            for lineno, record in self._records(name, expected[name]):
                try:
                    apply(record)
                except (KeyError, TypeError, ValueError) as exc:
                    raise CorruptStoreError(str(self.root / name), lineno, f"{type(exc).__name__}: {exc}") from exc

        wall = {b["ts"]: b.get("wall_clock") for b in manifest.batches}
        store.finish_load(manifest.clock, wall)
        if store.version_count != manifest.counts["versions"]:
            raise CorruptStoreError(str(self.root / DOCS_LOG), None, "version count disagrees with manifest")
        problems = store.check_invariants()
        if problems:
            raise CorruptStoreError(str(self.root / DOCS_LOG), None, problems[0])

    # -- writing --------------------------------------------------------------

    def _append(self, name: str, lines: list[str]) -> None:
        if not lines:
            return
        with open(self.root / name, "a", encoding="utf-8") as f:
            f.write("".join(line + "\n" for line in lines))
            f.flush()
            os.fsync(f.fileno())

    def commit_batch(
        self, manifest: Manifest, store: VersionedStore, delta: BatchDelta, stats: BatchStats
    ) -> None:
        """Persist the rows ``store`` gained in the batch, then advance the manifest."""
        c = manifest.counts
        ts = stats.ts
        dict_lines = [_dumps({"tid": tid, "term": term})
                      for tid, term in store.dict_entries()[c["dict_entries"]:]]
        closes = [vid for vid in store.closed_at(ts) if vid < c["versions"]]
        doc_lines = [_dumps({"close": vid, "to": ts}) for vid in closes]
        for vid in range(c["versions"], store.version_count):
            v = store.version(vid)
            doc_lines.append(_dumps({"vid": vid, "name": v.name, "from": v.valid_from,
                                     "len": v.exact_len, "alen": v.approx_len_code}))
        posting_lines = [_dumps({"tid": t, "vid": v, "tf": f})
                         for t, v, f in store.postings_since(c["postings"])]

        self._append(DICT_LOG, dict_lines)
        self._append(DOCS_LOG, doc_lines)
        self._append(POSTINGS_LOG, posting_lines)

        updated = Manifest(**asdict(manifest))
        updated.clock = ts
        updated.counts = {
            **c,
            "dict_entries": store.term_count,
            "versions": store.version_count,
            "closes": c["closes"] + len(closes),
            "postings": store.posting_count,
        }
        updated.batches = manifest.batches + [{
            "ts": ts,
            "docs_in": stats.docs_in,
            "upserts": len(delta.upserts),
            "deletes": len(delta.deletes),
            "live_ms": round(stats.live_ms, 3),
            "sync_ms": round(stats.sync_ms, 3),
            "cumulative_docs": stats.cumulative_docs,
            "wall_clock": store.wall_clock.get(ts),
        }]
        self.write_manifest(updated)
        manifest.__dict__.update(updated.__dict__)

    def commit_query(self, manifest: Manifest, record: QueryRecord) -> None:
        self._append(QUERIES_LOG, [record.to_json()])
        updated = Manifest(**asdict(manifest))
        updated.counts = {**manifest.counts, "queries": manifest.counts["queries"] + 1}
        self.write_manifest(updated)
        manifest.__dict__.update(updated.__dict__)

    # -- footprint ------------------------------------------------------------

    def footprint(self) -> dict[str, int]:
        return {name: (self.root / name).stat().st_size for name in LOGS + (MANIFEST,)}

    def store_bytes(self) -> int:
        """Bytes on disk of the versioned store relations (dict, docs, postings)."""
        return sum((self.root / name).stat().st_size for name in STORE_LOGS)


def _fsync_dir(path: Path) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)

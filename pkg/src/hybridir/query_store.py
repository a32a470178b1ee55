"""Registry of executed queries, addressable by persistent identifier."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Any, Iterator

from .errors import NotFoundError
from .ranking import RankedList

EMPTY_HASH = hashlib.sha256(b"").hexdigest()


def canonical_hash(ranked: RankedList) -> str:
    """SHA-256 of the rank-ordered document names joined by LF. Scores are ignored."""
    blob = "\n".join(entry.name for entry in ranked).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def make_pid(query_text: str, exec_ts: int, result_hash: str) -> str:
    blob = b"\x00".join(
        [query_text.encode("utf-8"), str(exec_ts).encode("ascii"), result_hash.encode("ascii")]
    )
    return "pid:" + hashlib.sha256(blob).hexdigest()[:20]


@dataclass(frozen=True)
class QueryRecord:
    pid: str
    query: str
    k: int
    exec_ts: int
    result_hash: str
    n_results: int
    creator: str | None
    description: str | None
    created: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> QueryRecord:
        fields = ("pid", "query", "k", "exec_ts", "result_hash", "n_results",
                  "creator", "description", "created")
        missing = [f for f in fields if f not in data]
        if missing:
            raise ValueError(f"query record lacks {missing}")
        return cls(**{f: data[f] for f in fields})


class QueryStore:
    """In-memory query table; durability is handled by the caller's sink."""

    def __init__(self) -> None:
        self._records: dict[str, QueryRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[QueryRecord]:
        return iter(self._records.values())

    def __contains__(self, pid: str) -> bool:
        return pid in self._records

    def register(
        self,
        query_text: str,
        k: int,
        exec_ts: int,
        ranked: RankedList,
        creator: str | None = None,
        description: str | None = None,
    ) -> tuple[str, bool]:
        """Store a query and its result hash.

        Returns ``(pid, is_new)``; registering the same (query, timestamp,
        result) again hands back the existing pid.
        """
        if k < 1:
            raise ValueError("k must be at least 1")
        if len(ranked) > k:
            raise ValueError(f"ranked list has {len(ranked)} entries, more than k={k}")
        result_hash = canonical_hash(ranked)
        pid = make_pid(query_text, exec_ts, result_hash)
        if pid in self._records:
            return pid, False
        self._records[pid] = QueryRecord(
            pid=pid,
            query=query_text,
            k=k,
            exec_ts=exec_ts,
            result_hash=result_hash,
            n_results=len(ranked),
            creator=creator,
            description=description,
            created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        return pid, True

    def get(self, pid: str) -> QueryRecord:
        try:
            return self._records[pid]
        except KeyError:
            raise NotFoundError(pid) from None

    def load(self, record: QueryRecord) -> None:
        if record.pid in self._records:
            raise ValueError(f"duplicate pid {record.pid}")
        self._records[record.pid] = record

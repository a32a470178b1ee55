"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 verification failure, 4 corrupt store.
"""

from __future__ import annotations

import argparse
import fcntl
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Sequence

from .analysis import STEMMERS, AnalyzerConfig, load_stopwords
from .bench import default_query_sets, measure, parse_queries_file, write_csv
from .errors import BatchError, CorruptStoreError, FutureTimestampError, NotFoundError, VerificationError
from .ranking import RankedList, ScoringParams
from .reproducer import DEFAULT_EPSILON
from .system import HybridSystem

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VERIFY = 3
EXIT_CORRUPT = 4

logger = logging.getLogger("hybridir")


class UsageError(Exception):
    pass


@contextmanager
def locked(root: Path) -> Iterator[None]:
    """One command per store directory at a time."""
    root.mkdir(parents=True, exist_ok=True)
    with open(root / ".lock", "w") as fh:
        try:
            fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            raise UsageError(f"store {root} is in use by another command") from None
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def read_corpus(path: str | Path) -> list[tuple[str, str | None]]:
    """Parse a JSON Lines corpus into (id, text) pairs; text None means delete."""
    out: list[tuple[str, str | None]] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: not valid JSON ({exc})") from None
            if not isinstance(rec, dict):
                raise UsageError(f"{path}:{lineno}: expected a JSON object")
            doc_id = rec.get("id")
            op = rec.get("op", "upsert")
            if not isinstance(doc_id, str) or not doc_id:
                raise UsageError(f"{path}:{lineno}: missing or empty id")
            if op == "delete":
                out.append((doc_id, None))
            elif op == "upsert":
                text = rec.get("text")
                if not isinstance(text, str):
                    raise UsageError(f"{path}:{lineno}: upsert needs a text string")
                out.append((doc_id, text))
            else:
                raise UsageError(f"{path}:{lineno}: unknown op {op!r}")
    return out


def split_batches(
    lines: list[tuple[str, str | None]], batch_size: int
) -> list[tuple[list[tuple[str, str]], list[str]]]:
    if batch_size < 1:
        raise UsageError("--batch-size must be positive")
    batches = []
    for start in range(0, len(lines), batch_size):
        chunk = lines[start:start + batch_size]
        ids = [doc_id for doc_id, _ in chunk]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise UsageError(f"batch starting at record {start + 1} repeats ids {dupes}")
        docs = [(doc_id, text) for doc_id, text in chunk if text is not None]
        deletes = [doc_id for doc_id, text in chunk if text is None]
        batches.append((docs, deletes))
    return batches


def print_ranked(ranked: RankedList) -> None:
    for rank, entry in enumerate(ranked, start=1):
        print(f"{rank} {entry.name} {entry.score:.6f}")


def _analyzer(args: argparse.Namespace) -> AnalyzerConfig | None:
    if args.stopwords is None and args.stemmer is None and not args.no_lowercase:
        return None
    return AnalyzerConfig(
        lowercase=not args.no_lowercase,
        stopwords=load_stopwords(args.stopwords) if args.stopwords else frozenset(),
        stemmer=args.stemmer or "none",
    )


def _open(args: argparse.Namespace, create: bool = False) -> HybridSystem:
    root = Path(args.dir)
    if not create and not (root / "manifest.json").exists():
        raise UsageError(f"{root} is not a store directory")
    analyzer = _analyzer(args) if create else None
    params = ScoringParams(k1=args.k1, b=args.b) if create else None
    return HybridSystem.open(root, analyzer, params)


# -- commands ------------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    batches = split_batches(read_corpus(args.corpus), args.batch_size)
    system = _open(args, create=True)
    for docs, deletes in batches:
        stats = system.ingest_batch(docs, deletes)
        print(f"ts={stats.ts} docs={stats.docs_in} live_ms={stats.live_ms:.3f} sync_ms={stats.sync_ms:.3f}")
    return EXIT_OK


def cmd_search(args: argparse.Namespace) -> int:
    system = _open(args)
    if args.at is None:
        ranked = system.search(args.query, args.k)
    else:
        ranked = system.time_travel_search(args.query, args.at, args.k)
    print_ranked(ranked)
    return EXIT_OK


def cmd_cite(args: argparse.Namespace) -> int:
    system = _open(args)
    print(system.cite(args.query, args.k, args.creator, args.description))
    return EXIT_OK


def cmd_resolve(args: argparse.Namespace) -> int:
    system = _open(args)
    report = system.resolve(args.pid, args.epsilon)
    print_ranked(report.ranked)
    print(f"corrected({len(report.swaps_applied)})" if report.corrected else "verified")
    return EXIT_OK


def cmd_verify_store(args: argparse.Namespace) -> int:
    system = _open(args)
    problems = system.verify()
    for p in problems:
        print(p)
    if problems:
        return EXIT_CORRUPT
    print(f"ok clock={system.clock} versions={system.store.version_count} "
          f"postings={system.store.posting_count} terms={system.store.term_count} "
          f"queries={len(system.queries)}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    batches = split_batches(read_corpus(args.corpus), args.batch_size)
    query_sets = parse_queries_file(args.queries) if args.queries else None
    system = _open(args, create=True)
    out = Path(args.dir) / "bench.csv"
    first = True
    for docs, deletes in batches:
        stats = system.ingest_batch(docs, deletes)
        if query_sets is None:
            query_sets = default_query_sets(system, seed=args.seed)
        rows = measure(system, stats, query_sets, args.epsilon)
        write_csv(out, rows, append=not first)
        first = False
        for r in rows:
            print(f"ts={r.ts} qset={r.qset} cum_docs={r.cum_docs} sync_ms={r.sync_ms:.2f} "
                  f"live_q_ms={r.live_q_ms:.3f} vcbr_q_ms={r.vcbr_q_ms:.3f} "
                  f"max_diff={r.max_score_diff:.2e} gap={r.mean_consec_gap:.2e} "
                  f"mismatches={r.rank_mismatches} corrections={r.corrections}")
    footprint = system.footprint()
    print(" ".join(f"{k}={v}" for k, v in footprint.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridir", description="Reproducible time-travel BM25 retrieval.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def store_args(p: argparse.ArgumentParser, creating: bool = False) -> None:
        p.add_argument("dir", help="store directory")
        if creating:
            p.add_argument("--stopwords", help="UTF-8 stopword file, one per line (new stores only)")
            p.add_argument("--stemmer", choices=STEMMERS, help="stemmer (new stores only)")
            p.add_argument("--no-lowercase", action="store_true", help="keep case (new stores only)")
            p.add_argument("--k1", type=float, default=1.2)
            p.add_argument("--b", type=float, default=0.75)

    p = sub.add_parser("ingest", help="ingest a JSON Lines corpus in batches")
    store_args(p, creating=True)
    p.add_argument("corpus")
    p.add_argument("--batch-size", type=int, default=20000)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("search", help="live search, or time-travel search with --at")
    store_args(p)
    p.add_argument("query")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--at", type=int, default=None, help="logical timestamp")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("cite", help="run a live search and mint a pid for it")
    store_args(p)
    p.add_argument("query")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--creator")
    p.add_argument("--description")
    p.set_defaults(func=cmd_cite)

    p = sub.add_parser("resolve", help="reproduce the ranked list behind a pid")
    store_args(p)
    p.add_argument("pid")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("verify-store", help="replay the logs and re-check invariants")
    store_args(p)
    p.set_defaults(func=cmd_verify_store)

    p = sub.add_parser("bench", help="ingest batch by batch, measuring both engines")
    store_args(p, creating=True)
    p.add_argument("corpus")
    p.add_argument("queries", nargs="?", help="one query per line, optional 'tag|' prefix")
    p.add_argument("--batch-size", type=int, default=200)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        with locked(Path(args.dir)):
            return args.func(args)
    except CorruptStoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except VerificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (UsageError, BatchError, NotFoundError, FutureTimestampError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

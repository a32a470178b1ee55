"""Re-execution of cited queries against the versioned store.

A pid resolves to its stored query and execution timestamp. The query is
re-run on the versioned store at that timestamp and the result hash is
compared with the stored one. The two engines compute scores at different
precisions, so documents whose scores are within ``epsilon`` of each other
may come back in swapped order; such lists are repaired by trying swaps of
adjacent near-tied pairs until the stored hash is reproduced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import islice

from .errors import AmbiguousTieError, VerificationError
from .query_store import QueryStore, canonical_hash
from .ranking import RankedList, ScoringParams
from .versioned_store import VersionedStore

DEFAULT_EPSILON = 1e-4
MAX_CANDIDATE_PAIRS = 16
MAX_PERMUTATIONS = 256


@dataclass
class ResolveReport:
    pid: str
    ranked: RankedList
    verified: bool
    corrected: bool
    swaps_applied: list[tuple[int, int]] = field(default_factory=list)
    max_cross_engine_gap: float = 0.0


def candidate_pairs(ranked: RankedList, epsilon: float, k: int | None = None) -> list[int]:
    """Indices i such that entries i and i+1 are within epsilon.

    With ``k`` set, only pairs that touch the first k entries are considered
    (the pair straddling the cut-off included).
    """
    stop = len(ranked) - 1 if k is None else min(len(ranked) - 1, k)
    return [
        i for i in range(stop)
        if abs(ranked[i].score - ranked[i + 1].score) < epsilon
    ]


def _swap_sets(cands: list[int], gaps: dict[int, float]) -> list[tuple[int, ...]]:
    """All non-empty sets of non-overlapping adjacent swaps, cheapest first."""
    out: list[tuple[int, ...]] = []

    def walk(pos: int, chosen: tuple[int, ...]) -> None:
        for j in range(pos, len(cands)):
            i = cands[j]
            if chosen and i <= chosen[-1] + 1:
                continue
            picked = chosen + (i,)
            out.append(picked)
            walk(j + 1, picked)

    walk(0, ())
    out.sort(key=lambda s: (sum(gaps[i] for i in s), s))
    return out


def correct_ties(
    ranked: RankedList,
    target_hash: str,
    epsilon: float = DEFAULT_EPSILON,
    k: int | None = None,
) -> tuple[RankedList, list[tuple[int, int]]] | None:
    """Find the near-tie swaps that make ``ranked`` hash to ``target_hash``.

    Returns the repaired list (cut to ``k`` when given) and the swapped index
    pairs, or None when no permutation within the budget matches.
    """
    k = len(ranked) if k is None else k
    cands = candidate_pairs(ranked, epsilon, k)
    if len(cands) > MAX_CANDIDATE_PAIRS:
        raise AmbiguousTieError(
            f"ambiguous tie structure: {len(cands)} near-tied pairs exceed {MAX_CANDIDATE_PAIRS}"
        )
    gaps = {i: abs(ranked[i].score - ranked[i + 1].score) for i in cands}
    for swaps in islice(_swap_sets(cands, gaps), MAX_PERMUTATIONS):
        trial = list(ranked)
        for i in swaps:
            trial[i], trial[i + 1] = trial[i + 1], trial[i]
        trial = trial[:k]
        if canonical_hash(trial) == target_hash:
            return trial, [(i, i + 1) for i in swaps]
    return None


def resolve(
    store: VersionedStore,
    queries: QueryStore,
    pid: str,
    params: ScoringParams | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> ResolveReport:
    """Rebuild the ranked list a pid was minted for, verified by hash."""
    record = queries.get(pid)
    params = (params or ScoringParams()).with_k(record.k + 1)
    # one extra result so a near-tie across the top-k boundary is repairable
    extended = store.search_at(record.query, record.exec_ts, params)
    ranked = extended[: record.k]
    actual = canonical_hash(ranked)
    if actual == record.result_hash:
        return ResolveReport(pid, ranked, verified=True, corrected=False)

    try:
        fixed = correct_ties(extended, record.result_hash, epsilon, k=record.k)
    except AmbiguousTieError as exc:
        raise VerificationError(pid, record.result_hash, actual) from exc
    if fixed is None:
        raise VerificationError(pid, record.result_hash, actual)
    ranked, swaps = fixed
    gap = max(abs(extended[i].score - extended[j].score) for i, j in swaps)
    return ResolveReport(pid, ranked, True, True, swaps, gap)


def time_travel_search(
    store: VersionedStore,
    query: str,
    ts: int | None = None,
    params: ScoringParams | None = None,
) -> RankedList:
    """Rank against the corpus as of ``ts``, or the latest state when ts is None."""
    return store.search_at(query, store.clock if ts is None else ts, params)

import math

import pytest
from hypothesis import given, settings, strategies as st

from hybridir.errors import BatchError, FutureTimestampError
from hybridir.ingest import BatchDelta, DocUpdate
from hybridir.norms import encode_len
from hybridir.ranking import ScoringParams, is_well_ordered
from hybridir.versioned_store import DocumentVersion, VersionedStore, valid_at

from oracle import History, same_ranking


def version(valid_from, valid_to):
    return DocumentVersion(0, "d", valid_from, valid_to, 1, 1)


def test_valid_at_boundaries():
    assert valid_at(version(1, None), 1) is True
    assert valid_at(version(1, 3), 3) is False
    assert valid_at(version(1, 3), 2) is True
    assert valid_at(version(2, None), 1) is False


def test_counts_over_time(scenario_s):
    store = scenario_s.store
    assert [store.n_docs_at(ts) for ts in (0, 1, 2, 3)] == [0, 3, 4, 3]
    assert store.df_at("apple", 1) == 2
    assert store.df_at("apple", 2) == 3
    assert store.df_at("durian", 2) == 0
    assert store.avgdl_at(0) == 0.0
    assert store.avgdl_at(1) == 3.0
    assert store.avgdl_at(2) == 3.0
    assert store.avgdl_at(3) == pytest.approx(10 / 3, abs=1e-15)


def test_future_timestamp_rejected(scenario_s):
    store = scenario_s.store
    for call in (store.n_docs_at, store.avgdl_at, lambda ts: store.df_at("apple", ts),
                 lambda ts: store.search_at("apple", ts)):
        with pytest.raises(FutureTimestampError):
            call(4)


def test_search_at_first_batch(scenario_s):
    ranked = scenario_s.store.search_at("apple", 1)
    assert [e.name for e in ranked] == ["d1", "d3"]
    assert ranked[0].score == pytest.approx(0.293752, abs=1e-6)
    assert ranked[1].score == pytest.approx(0.188001, abs=1e-6)


def test_search_at_second_batch(scenario_s):
    ranked = scenario_s.store.search_at("apple", 2)
    idf = math.log(1 + (4 - 3 + 0.5) / 3.5)
    assert idf == pytest.approx(0.356675, abs=1e-6)
    tfnorm = {"d1": 2 / (2 + 1.2), "d3": 1 / (1 + 1.2 * (0.25 + 0.75 * 4 / 3)), "d4": 3 / (3 + 1.2)}
    expected = sorted(((n, idf * t) for n, t in tfnorm.items()), key=lambda x: -x[1])
    assert [e.name for e in ranked] == [n for n, _ in expected]
    for entry, (_, score) in zip(ranked, expected):
        assert entry.score == pytest.approx(score, rel=1e-12)


def test_empty_query(scenario_s):
    assert scenario_s.store.search_at("", 2) == []
    assert scenario_s.store.search_at("apple", 0) == []


def test_version_chain(scenario_s):
    scenario_s.ingest_batch([("d1", "kiwi")])
    chain = scenario_s.store.versions_of("d1")
    assert [(v.valid_from, v.valid_to) for v in chain] == [(1, 4), (4, None)]
    assert [(v.valid_from, v.valid_to) for v in scenario_s.store.versions_of("d2")] == [(1, 3)]
    assert scenario_s.store.check_invariants() == []


def _delta(*upserts, deletes=()):
    return BatchDelta(
        upserts=[DocUpdate(n, tf, sum(tf.values()), encode_len(sum(tf.values())), r) for n, tf, r in upserts],
        deletes=list(deletes),
    )


def test_out_of_order_timestamp_rejected():
    store = VersionedStore()
    with pytest.raises(BatchError):
        store.apply_batch(_delta(("a", {"x": 1}, False)), 2)
    assert store.clock == 0


def test_malformed_deltas_rejected_atomically():
    store = VersionedStore()
    store.apply_batch(_delta(("a", {"x": 1}, False)), 1)
    bad = [
        _delta(("b", {"x": 1}, True)),                      # claims a replacement that isn't there
        _delta(("a", {"x": 1}, False)),                     # claims new, but a is open
        _delta(("b", {"x": 1}, False), deletes=["zz"]),     # delete of unknown document
        _delta(("b", {"x": 0}, False)),                     # non-positive tf
        _delta(("b", {"x": 1}, False), deletes=["b"]),      # name twice
        {"upserts": []},                                    # not a delta at all
    ]
    for delta in bad:
        with pytest.raises(BatchError):
            store.apply_batch(delta, 2)
        assert store.clock == 1
        assert store.version_count == 1
        assert store.check_invariants() == []


def test_rollback_restores_previous_state(scenario_s):
    store = scenario_s.store
    before = [store.search_at("apple cherry", ts) for ts in range(4)]
    store.apply_batch(_delta(("d1", {"fig": 2}, True), ("d9", {"apple": 1}, False), deletes=["d3"]), 4)
    assert store.clock == 4
    store.rollback_last()
    assert store.clock == 3
    assert store.term_id("fig") is None
    assert [store.search_at("apple cherry", ts) for ts in range(4)] == before
    assert store.check_invariants() == []


def test_table_scan_df(scenario_s):
    store = scenario_s.store
    versions = list(store.versions())
    terms = dict((tid, term) for tid, term in store.dict_entries())
    for ts in range(store.clock + 1):
        for term in terms.values():
            count = sum(
                1 for tid, vid, _ in store.postings_log()
                if terms[tid] == term and valid_at(versions[vid], ts)
            )
            assert store.df_at(term, ts) == count


names = st.sampled_from([f"n{i}" for i in range(10)])
words = st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=18)
batches = st.lists(
    st.tuples(st.dictionaries(names, words, max_size=5), st.lists(names, max_size=3, unique=True)),
    min_size=1, max_size=6,
)


@settings(max_examples=100, deadline=None)
@given(batches)
def test_history_matches_shadow(history):
    from hybridir.system import HybridSystem

    system = HybridSystem()
    shadow = History()
    for upserts, deletes in history:
        deletes = [d for d in deletes if d not in upserts]
        docs = [(n, " ".join(ws)) for n, ws in upserts.items()]
        system.ingest_batch(docs, deletes)
        shadow.apply(docs, deletes)
    store = system.store
    assert store.check_invariants() == []
    for ts in range(store.clock + 1):
        assert store.n_docs_at(ts) == shadow.n_docs(ts)
        assert store.avgdl_at(ts) == shadow.avgdl(ts)
        for term in "abcd":
            assert store.df_at(term, ts) <= store.n_docs_at(ts)
            assert store.df_at(term, ts) == shadow.df(term, ts)
        ranked = store.search_at("a b d", ts, ScoringParams(k=4))
        assert is_well_ordered(ranked)
        assert same_ranking(ranked, shadow.search("a b d", ts), 4)

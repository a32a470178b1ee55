import json

import pytest

from hybridir.analysis import AnalyzerConfig
from hybridir.errors import CorruptStoreError
from hybridir.storage import DICT_LOG, DOCS_LOG, LOGS, MANIFEST, POSTINGS_LOG, QUERIES_LOG
from hybridir.system import HybridSystem

from conftest import SCENARIO_S


def build(root):
    system = HybridSystem.open(root)
    for docs, deletes in SCENARIO_S:
        system.ingest_batch(docs, deletes)
    system.ingest_batch([("d1", "kiwi apple"), ("d5", "banana banana")])
    pid = system.cite("apple banana", creator="ana", description="fruit subset")
    return system, pid


def snapshot(system):
    store = system.store
    out = {"clock": system.clock, "live": system.search("apple banana cherry kiwi")}
    for ts in range(system.clock + 1):
        out[ts] = (
            store.n_docs_at(ts),
            store.avgdl_at(ts),
            {t: store.df_at(t, ts) for t in ("apple", "banana", "cherry", "kiwi", "durian")},
            store.search_at("apple banana cherry kiwi", ts),
        )
    return out


def test_open_empty_dir(tmp_path):
    system = HybridSystem.open(tmp_path / "s")
    assert system.clock == 0
    assert system.search("anything") == []
    assert system.store.version_count == 0
    for name in LOGS + (MANIFEST,):
        assert (tmp_path / "s" / name).exists()


def test_reopen_is_observationally_identical(tmp_path):
    system, pid = build(tmp_path)
    before = snapshot(system)
    record = system.queries.get(pid)
    again = HybridSystem.open(tmp_path)
    assert snapshot(again) == before
    assert again.queries.get(pid) == record
    assert again.resolve(pid).ranked == system.resolve(pid).ranked
    assert again.verify() == []


def test_log_format(tmp_path):
    build(tmp_path)
    dict_rows = [json.loads(l) for l in (tmp_path / DICT_LOG).read_text().splitlines()]
    assert dict_rows[0] == {"tid": 0, "term": "apple"}
    docs = [json.loads(l) for l in (tmp_path / DOCS_LOG).read_text().splitlines()]
    assert docs[0] == {"vid": 0, "name": "d1", "from": 1, "len": 3, "alen": 3}
    assert {"close": 1, "to": 3} in docs
    post = json.loads((tmp_path / POSTINGS_LOG).read_text().splitlines()[0])
    assert post == {"tid": 0, "vid": 0, "tf": 2}
    query = json.loads((tmp_path / QUERIES_LOG).read_text())
    assert list(query) == ["pid", "query", "k", "exec_ts", "result_hash", "n_results",
                           "creator", "description", "created"]


@pytest.mark.parametrize("log", [DICT_LOG, DOCS_LOG, POSTINGS_LOG, QUERIES_LOG])
def test_truncated_log_is_corrupt(tmp_path, log):
    build(tmp_path)
    path = tmp_path / log
    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    path.write_text("".join(lines[:-1]), encoding="utf-8")
    with pytest.raises(CorruptStoreError) as exc:
        HybridSystem.open(tmp_path)
    assert log in str(exc.value) and "corrupt store" in str(exc.value)
    assert exc.value.line == len(lines)


def test_garbled_record_reports_line(tmp_path):
    build(tmp_path)
    path = tmp_path / POSTINGS_LOG
    lines = path.read_text().splitlines(keepends=True)
    lines[4] = "{not json\n"
    path.write_text("".join(lines))
    with pytest.raises(CorruptStoreError) as exc:
        HybridSystem.open(tmp_path)
    assert exc.value.line == 5


def test_crash_before_manifest_update_opens_at_previous_clock(tmp_path):
    system, _ = build(tmp_path)
    before = snapshot(system)
    manifest = (tmp_path / MANIFEST).read_bytes()
    system.ingest_batch([("d6", "apple fig"), ("d1", "fig")], deletes=["d3"])
    # simulate dying after the log appends but before the manifest swap
    (tmp_path / MANIFEST).write_bytes(manifest)
    with open(tmp_path / POSTINGS_LOG, "a") as f:
        f.write('{"tid": 0, "vi')  # torn write
    reopened = HybridSystem.open(tmp_path)
    assert snapshot(reopened) == before
    # and the store keeps working from there
    reopened.ingest_batch([("d7", "apple")])
    assert HybridSystem.open(tmp_path).clock == before["clock"] + 1


def test_logs_are_append_only(tmp_path):
    system, _ = build(tmp_path)
    prefixes = {log: (tmp_path / log).read_bytes() for log in LOGS}
    system.ingest_batch([("d1", "plum")], deletes=["d5"])
    system.cite("plum")
    for log, prefix in prefixes.items():
        assert (tmp_path / log).read_bytes().startswith(prefix)


def test_analyzer_is_frozen(tmp_path):
    HybridSystem.open(tmp_path, AnalyzerConfig(stopwords={"the"}))
    assert HybridSystem.open(tmp_path).analyzer.stopwords == {"the"}
    with pytest.raises(ValueError):
        HybridSystem.open(tmp_path, AnalyzerConfig())


def test_manifest_counts(tmp_path):
    system, _ = build(tmp_path)
    manifest = json.loads((tmp_path / MANIFEST).read_text())
    assert manifest["format_version"] == 1
    assert manifest["clock"] == system.clock
    assert manifest["counts"]["versions"] == system.store.version_count
    assert manifest["counts"]["postings"] == system.store.posting_count
    assert manifest["counts"]["dict_entries"] == system.store.term_count
    assert manifest["analyzer_digest"] == system.analyzer.digest()


def test_overlapping_versions_detected(tmp_path):
    build(tmp_path)
    path = tmp_path / DOCS_LOG
    lines = path.read_text().splitlines(keepends=True)
    # drop the close record of d1's first version: two open versions of d1
    idx = next(i for i, l in enumerate(lines) if json.loads(l) == {"close": 0, "to": 4})
    lines[idx] = json.dumps({"close": 3, "to": 4}) + "\n"
    path.write_text("".join(lines))
    with pytest.raises(CorruptStoreError):
        HybridSystem.open(tmp_path)

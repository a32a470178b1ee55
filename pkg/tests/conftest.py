from __future__ import annotations

import pytest

from hybridir.system import HybridSystem

ACCEPTANCE: list[tuple[str, bool, str]] = []

SCENARIO_S = [
    ([("d1", "apple banana apple"), ("d2", "banana cherry"), ("d3", "cherry apple cherry cherry")], []),
    ([("d4", "apple apple apple")], []),
    ([], ["d2"]),
]


@pytest.fixture
def scenario_s() -> HybridSystem:
    """ts1 inserts d1,d2,d3; ts2 inserts d4; ts3 deletes d2."""
    system = HybridSystem()
    for docs, deletes in SCENARIO_S:
        system.ingest_batch(docs, deletes)
    return system


@pytest.fixture
def report():
    def _report(criterion: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE.append((criterion, ok, line))
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in ACCEPTANCE:
        terminalreporter.write_line(line)

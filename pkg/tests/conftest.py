"""Collects acceptance outcomes and prints one line per criterion."""

import pytest

CRITERIA = {
    1: "ergodic rate vs quadrature",
    2: "decoding probabilities vs 2-D quadrature",
    3: "decoding probabilities vs Monte Carlo",
    4: "PZF gain law",
    5: "coded caching and MDS exactness",
    6: "cache-split optimality",
    7: "distortion level-set structure",
    8: "end-to-end optimization sweep",
}

_results = {}


class AcceptanceRecorder:
    def record(self, criterion, passed, detail):
        prev = _results.get(criterion)
        if prev is not None:
            passed = passed and prev[0]
            detail = f"{prev[1]}; {detail}"
        _results[criterion] = (bool(passed), detail)
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k, name in CRITERIA.items():
        if k not in _results:
            terminalreporter.write_line(f"[----] {k}. {name}: not run")
            continue
        passed, detail = _results[k]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {k}. {name}: {detail}")

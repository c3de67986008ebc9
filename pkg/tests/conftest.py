import time

import numpy as np
import pytest

# criterion id -> [title, outcomes of its tests]
_CRITERIA = {}
_STARTED = time.perf_counter()
SUITE_BUDGET = 120.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion a test covers")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    cid, title = mark.args
    entry = _CRITERIA.setdefault(cid, [title, []])
    entry[1].append(report.passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[cid]
        verdict = "PASS" if outcomes and all(outcomes) else "FAIL"
        tr.write_line(f"{verdict}  criterion {cid}: {title} ({sum(outcomes)}/{len(outcomes)} checks)")
    stats = tr.stats
    collected = sum(len(v) for k, v in stats.items() if k in ("passed", "failed", "error"))
    acceptance_only = all(r.nodeid.startswith("tests/test_acceptance.py")
                          for k in ("passed", "failed") for r in stats.get(k, ()))
    elapsed = time.perf_counter() - _STARTED
    if acceptance_only:
        tr.write_line(f"n/a   criterion 5 runtime: full-suite runtime not measured in a partial run "
                      f"({elapsed:.1f} s for {collected} tests)")
    else:
        verdict = "PASS" if elapsed < SUITE_BUDGET else "FAIL"
        tr.write_line(f"{verdict}  criterion 5 runtime: full suite ran in {elapsed:.1f} s "
                      f"(budget {SUITE_BUDGET:.0f} s)")

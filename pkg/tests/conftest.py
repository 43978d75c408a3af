import re

import pytest
from hypothesis import HealthCheck, settings

from c2knn.dataset import Dataset

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

_CRITERION = re.compile(r"test_criterion_(\d+)")
_results: dict[int, list[tuple[str, str]]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2]
        elif report.failed:
            detail = str(report.longrepr).strip().splitlines()[-1][:160]
        else:
            detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
        _results.setdefault(int(m.group(1)), []).append((report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        outcomes = [o for o, _ in _results[n]]
        if "failed" in outcomes:
            verdict = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        details = "; ".join(d for _, d in _results[n] if d)
        tr.write_line(f"criterion {n:2d}: {verdict}" + (f"  ({details})" if details else ""))


@pytest.fixture
def tiny_ds():
    # items 0..5, four users with overlapping tastes
    return Dataset.from_profiles([[0, 1, 2], [1, 2, 3], [3, 4, 5], [0, 1, 2]], n_items=6)


import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, tuple[str, float, str]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or report.outcome == "failed" or report.skipped:
        prev = _CRITERIA.get(n)
        if prev and prev[0] == "FAIL":
            return
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _CRITERIA[n] = (outcome, report.duration, m.group(2))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcome, secs, name = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {outcome}  {name.replace('_', ' ')}  ({secs:.2f} s)")

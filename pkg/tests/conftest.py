import re
from collections import OrderedDict

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_outcomes: "OrderedDict[int, list[tuple[str, str, float]]]" = OrderedDict()


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = "xfail" if hasattr(report, "wasxfail") else report.outcome
        _outcomes.setdefault(int(m.group(1)), []).append(
            (report.nodeid.split("::")[-1], outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_outcomes):
        runs = _outcomes[k]
        ok = all(o == "passed" for _, o, _ in runs)
        secs = sum(d for *_, d in runs)
        detail = ", ".join(f"{name.split('_', 3)[-1]}={o}" for name, o, _ in runs)
        tr.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({secs:.1f} s; {detail})")

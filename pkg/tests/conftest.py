import os
import re
import sys

sys.path.insert(0, os.path.dirname(__file__))

_acceptance = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_(A\d)", report.nodeid)
    if not m:
        return
    if report.when != "call" and report.outcome == "passed":
        return
    crit = m.group(1)
    detail = dict(report.user_properties).get("acceptance", "")
    if report.failed:
        detail = str(report.longrepr).strip().splitlines()[-1][:160]
    prev = _acceptance.get(crit)
    ok = report.passed and (prev is None or prev[0])
    details = ([prev[1]] if prev and prev[1] else []) + ([detail] if detail else [])
    _acceptance[crit] = (ok, "; ".join(details))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_acceptance, key=lambda c: int(c[1:])):
        ok, detail = _acceptance[crit]
        terminalreporter.write_line(f"{crit} {'PASS' if ok else 'FAIL'}  {detail}")

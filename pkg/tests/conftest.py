"""Shared pytest hooks: a one-line-per-criterion summary for the acceptance suite."""
import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        n, title = mark.args
        detail = dict(item.user_properties).get("detail", "")
        entry = _RESULTS.setdefault(n, {"title": title, "ok": True, "details": []})
        entry["ok"] &= report.outcome == "passed"
        if detail:
            entry["details"].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        line = f"criterion {n} {'PASS' if e['ok'] else 'FAIL'}: {e['title']}"
        if e["details"]:
            line += " | " + "; ".join(e["details"])
        tr.write_line(line)

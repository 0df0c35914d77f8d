"""Collects acceptance results and prints one PASS/FAIL line per criterion."""

from collections import OrderedDict

_results: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    n, title = crit
    entry = _results.setdefault(n, dict(title=title, ok=True, notes=[]))
    entry["ok"] &= report.passed
    entry["notes"].extend(v for k, v in report.user_properties if k == "measured")


def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        e = _results[n]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {status}  {e['title']}")
        for note in e["notes"]:
            terminalreporter.write_line(f"              {note}")

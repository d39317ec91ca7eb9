"""Collects acceptance outcomes and prints one verdict line per criterion."""
from collections import defaultdict

_TITLES = {}
_OUTCOMES = defaultdict(list)
_DETAILS = defaultdict(list)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            number, title = m.args
            _TITLES[number] = title
            item.user_properties.append(("criterion", number))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    number = props.get("criterion")
    if number is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _OUTCOMES[number].append((report.nodeid.split("::")[-1], report.outcome))
        _DETAILS[number] += [v for k, v in report.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        results = _OUTCOMES[number]
        failed = [name for name, outcome in results if outcome != "passed"]
        verdict = "FAIL" if failed else "PASS"
        line = f"criterion {number} [{_TITLES[number]}]: {verdict} ({len(results) - len(failed)}/{len(results)} checks)"
        tr.write_line(line)
        for name in failed:
            tr.write_line(f"    failed: {name}")
        for d in _DETAILS[number]:
            tr.write_line(f"    {d}")

"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    _results[report.nodeid] = (report.outcome, props)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args))


def pytest_terminal_summary(terminalreporter):
    rows = []
    for nodeid, (outcome, props) in _results.items():
        number, title = props["criterion"]
        detail = props.get("measured", "")
        rows.append((number, title, outcome, detail))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, detail in sorted(rows):
        verdict = "PASS" if outcome == "passed" else ("SKIP" if outcome == "skipped" else "FAIL")
        line = f"criterion {number} {title}: {verdict}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)

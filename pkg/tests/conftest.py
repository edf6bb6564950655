"""Collects the outcome of every acceptance criterion and prints one line each."""

_criteria = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    n = props["criterion"]
    if report.when == "call" or report.failed:
        if report.when == "call" or n not in _criteria:
            _criteria[n] = (report.outcome.upper(), props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        outcome, detail = _criteria[n]
        word = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line("criterion %2d: %s  %s" % (n, word, detail))

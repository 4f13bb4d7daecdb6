import pytest

CRITERIA = {
    1: "finite structures",
    2: "column-norm inequalities",
    3: "Mazur map",
    4: "expanders",
    5: "invariant vectors",
    6: "pipeline soundness",
    7: "determinism",
}

_outcomes: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or item.get_closest_marker("slow") is not None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes.setdefault(marker.args[0], []).append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        runs = _outcomes.get(n)
        if not runs:
            status = "NOT RUN"
        else:
            status = "PASS" if all(runs) else "FAIL"
        terminalreporter.write_line(f"criterion {n} ({title}): {status} [{sum(runs or [])}/{len(runs or [])} checks]")

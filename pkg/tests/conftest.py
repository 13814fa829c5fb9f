import pytest

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    label = mark.args[0]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if report.skipped:
            status = "SKIP"
        else:
            status = "PASS" if report.passed else "FAIL"
        _results[label] = status


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_results, key=lambda s: int(s.split()[0][1:])):
        terminalreporter.write_line(f"{_results[label]:4}  {label}")

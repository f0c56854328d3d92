import pytest

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or report.when != "call" and not report.failed:
        return
    detail = dict(item.user_properties).get("detail", "")
    if report.failed and call.excinfo is not None:
        detail = f"{detail} {call.excinfo.typename}: {str(call.excinfo.value).splitlines()[0][:200]}".strip()
    _results[mark.args[0]] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_results):
        status, detail = _results[k]
        terminalreporter.write_line(f"criterion {k:2d}: {status}  {detail}")

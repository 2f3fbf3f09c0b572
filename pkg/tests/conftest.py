import pytest

# (number, name, passed, detail) for every test tagged with @pytest.mark.criterion
_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
    _criteria.append((str(mark.args[0]), mark.args[1], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_criteria):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {number:<3} {name}: {detail}")

import pytest

# Collected verdicts for the acceptance tests (test_ac*), printed as one line
# per criterion at the end of the session so the outcome is scannable.
_ac_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    name = item.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_ac"):
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        doc = (item.function.__doc__ or name).strip().splitlines()[0]
        _ac_results[name] = (rep.passed, doc)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ac_results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ac_results):
        passed, doc = _ac_results[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {doc}")

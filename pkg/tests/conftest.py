import pytest

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, label = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        prev = _CRITERIA.get(number)
        # a criterion passes only when every test attached to it passes
        if prev is None or prev[0] == "PASS":
            _CRITERIA[number] = (status, label)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, label = _CRITERIA[number]
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {label}")
    n_pass = sum(s == "PASS" for s, _ in _CRITERIA.values())
    terminalreporter.write_line(f"{n_pass}/{len(_CRITERIA)} acceptance criteria passed")

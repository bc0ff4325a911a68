import re

_ACCEPTANCE = {}
_NAME = re.compile(r"test_c(\d+)([a-z]?)_")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    m = _NAME.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        key = (int(m.group(1)), m.group(2))
        _ACCEPTANCE[key] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (num, variant), (status, detail) in sorted(_ACCEPTANCE.items()):
        label = f"criterion {num}{variant}"
        terminalreporter.write_line(f"{label:<14} {status}  {detail}".rstrip())

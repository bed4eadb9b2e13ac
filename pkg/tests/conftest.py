import sys
from pathlib import Path

import pytest

# shared oracles live next to the tests
sys.path.insert(0, str(Path(__file__).parent))

_verdicts: dict[str, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    cid, title = mark.args
    measured = "; ".join(str(v) for k, v in report.user_properties if k == "measured")
    if report.when == "setup" and report.failed:
        _verdicts[cid] = ("FAIL", f"{title} (setup error)", "")
    elif report.when == "call":
        _verdicts[cid] = ("PASS" if report.passed else "FAIL", title, measured)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_verdicts, key=lambda c: int(c[1:])):
        verdict, title, measured = _verdicts[cid]
        line = f"{cid} {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{measured}]" if measured else ""))

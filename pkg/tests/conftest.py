import os
import sys
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", derandomize=True, deadline=None)
settings.register_profile("stress", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

sys.path.insert(0, str(Path(__file__).parent))

_GATE: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance gate criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.passed:
        status = "PASS"
    elif hasattr(rep, "wasxfail"):
        status = "FAIL (expected)"
    else:
        status = "FAIL"
    _GATE[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _GATE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_GATE):
        status, title, detail = _GATE[number]
        line = f"criterion {number:2d} {status:<16} {title}"
        if detail:
            line += f" :: {detail}"
        terminalreporter.write_line(line)

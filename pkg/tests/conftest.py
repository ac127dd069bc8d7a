import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from perfforge import kernels  # noqa: E402


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    impl = kernels.available_backends()[request.param]
    monkeypatch.setattr(kernels, "jaccard_matrix", impl.jaccard_matrix)
    monkeypatch.setattr(kernels, "dtw_fill", impl.dtw_fill)
    return request.param


# acceptance summary: tests marked ``acceptance(n, title)`` get one line each

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        cases = _ACCEPTANCE.setdefault(marker.args[0], (marker.args[1], []))[1]
        cases.append((report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, cases = _ACCEPTANCE[number]
        failed = sum(outcome != "passed" for outcome, _ in cases)
        status = "FAIL" if failed else "PASS"
        line = f"AC{number:02d} {status}  {title}"
        if len(cases) > 1:
            line += f"  [{len(cases) - failed}/{len(cases)} cases]"
        details = " | ".join(d for _, d in cases if d)
        terminalreporter.write_line(f"{line}  ({details})" if details else line)

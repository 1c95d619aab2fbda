import re

import pytest

from suite import suite_instances

_CRITERIA = {}
_METRICS = {}


@pytest.fixture(scope="session")
def instances():
    return suite_instances()


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA[n] = _CRITERIA.get(n, True) and report.outcome == "passed"
    for key, value in report.user_properties:
        _METRICS.setdefault(n, {})[key] = value


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        metrics = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                            for k, v in sorted(_METRICS.get(n, {}).items()))
        line = f"criterion {n}: {'PASS' if _CRITERIA[n] else 'FAIL'}"
        terminalreporter.write_line(f"{line}  ({metrics})" if metrics else line)

import sys
from pathlib import Path

import numpy as np
import pytest

# lets test modules import the brute-force oracles as a plain module
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def line_features():
    """1-D pool [0, 4, 10] used by the hand-traced K-center examples."""
    return np.array([[0.0], [4.0], [10.0]])


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, text): exit criterion from the acceptance list")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = _ACCEPTANCE.get(report.nodeid)
    if marker is not None:
        marker["outcome"] = report.outcome


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            _ACCEPTANCE[item.nodeid] = {"number": mark.args[0], "text": mark.args[1], "outcome": "not run"}


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for entry in sorted(_ACCEPTANCE.values(), key=lambda e: (e["number"], e["text"])):
        status = {"passed": "PASS", "failed": "FAIL"}.get(entry["outcome"], entry["outcome"].upper())
        terminalreporter.write_line(f"[{status}] criterion {entry['number']}: {entry['text']}")

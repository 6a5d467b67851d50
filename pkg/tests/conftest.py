from pathlib import Path

import pytest

from namerec.acg import AggregatedCallGraph

FIXTURES = Path(__file__).parent / "fixtures"

TOY_EDGES = [
    ("saveFile", "open"),
    ("saveFile", "write"),
    ("saveFile", "close"),
    ("loadFile", "read"),
    ("loadFile", "parse"),
    ("loadFile", "close"),
    ("copyFile", "read"),
    ("copyFile", "write"),
    ("closeAll", "close"),
    ("closeAll", "flush"),
]


@pytest.fixture
def toy_graph():
    g = AggregatedCallGraph([], TOY_EDGES)
    assert len(g) == 10
    return g


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# one PASS/FAIL line per acceptance criterion in the terminal summary
_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
        prev = _criteria.get(number, (title, "PASS"))[1]
        if prev == "FAIL":
            status = "FAIL"
        _criteria[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria, key=int):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")

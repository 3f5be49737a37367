import json
from pathlib import Path

import pytest

from listening_energy.sentiment import default_lexicon

DATA = Path(__file__).parent / "data"

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or report.outcome != "passed":
        number, title = marker.args
        entry = _criteria.setdefault(number, {"title": title, "results": {}})
        if entry["results"].get(item.nodeid) != "failed":
            entry["results"][item.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        outcomes = list(entry["results"].values())
        status = "FAIL" if "failed" in outcomes else ("PASS" if "passed" in outcomes else "SKIP")
        terminalreporter.write_line(f"{status}  criterion {number}: {entry['title']} ({len(outcomes)} checks)")


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def oracle_records():
    lines = (DATA / "oracle_scores.jsonl").read_text(encoding="utf-8").splitlines()
    return [json.loads(line) for line in lines if line]

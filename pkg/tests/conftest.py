import numpy as np
import pytest
from hypothesis import settings

from nanoloc.channel import default_medium, flat_medium
from nanoloc.config import default_alphabet, dual_ulas, single_ula

settings.register_profile("nanoloc", max_examples=60, deadline=None)
settings.load_profile("nanoloc")


@pytest.fixture(scope="session")
def alphabet():
    return default_alphabet()


@pytest.fixture(scope="session")
def synthetic_medium():
    return default_medium()


@pytest.fixture(scope="session")
def lossless_medium():
    return flat_medium(0.0)


@pytest.fixture(scope="session")
def ula_single():
    return single_ula()[0]


@pytest.fixture(scope="session")
def ula_pair():
    return dual_ulas()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# per-criterion pass/fail lines for the acceptance suite
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _CRITERIA.setdefault(marker.args[0], {"title": marker.kwargs.get("title", ""), "tests": {}})
    if rep.failed:
        entry["tests"][item.name] = False
    elif rep.when == "call":
        entry["tests"].setdefault(item.name, rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        failed = [name for name, ok in entry["tests"].items() if not ok]
        status = "FAIL" if failed else "PASS"
        detail = f"failing: {', '.join(failed)}" if failed else f"{len(entry['tests'])} checks"
        terminalreporter.write_line(f"criterion {number} [{entry['title']}]: {status} ({detail})")

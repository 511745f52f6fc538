import numpy as np
import pytest

from gnas.oracle import synth_benchmark
from gnas.search_space import default_registry

PLANTED = ("GCN", "GAT", "GCN", "Skip-Connection")
PLANTED_TOP = "space-1|GCN,GAT,GCN,Skip-Connection"


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def space(registry):
    return registry.space("space-1")


@pytest.fixture(scope="session")
def toy_space(registry):
    # 3 ops -> 81 architectures
    return registry.space("space-1", ["GCN", "GAT", "GIN"])


@pytest.fixture(scope="session")
def fixture_table(space, registry):
    return synth_benchmark(space, "Cora", 0, list(PLANTED), registry=registry)


@pytest.fixture(scope="session")
def toy_table(toy_space, registry):
    return synth_benchmark(toy_space, "Cora", 3, registry=registry)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance summary: one PASS/FAIL line per criterion -------------------

_ACCEPTANCE: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    n, title = mark.kwargs["criterion"], mark.kwargs["title"]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        _ACCEPTANCE[n] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")

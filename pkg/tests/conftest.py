import numpy as np
import pytest

from pointlca import _kernels, rng as rng_mod
from pointlca._accel import HAS_NUMBA
from pointlca.event_cloud import EventStream


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    use = request.param == "numba"
    if use and not HAS_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setattr(_kernels, "USE_NUMBA", use)
    monkeypatch.setattr(rng_mod, "USE_NUMBA", use)
    return request.param


def make_stream(n, duration=100_000, width=34, height=34, seed=0, label=None):
    g = np.random.default_rng(seed)
    t = np.sort(g.integers(0, duration + 1, size=n))
    t[0], t[-1] = 0, duration
    return EventStream(g.integers(0, width, n), g.integers(0, height, n), t,
                       g.integers(0, 2, n).astype(bool), width, height, label)


def random_unit_dictionary(g, N, M):
    Phi = g.normal(size=(N, M))
    return Phi / np.linalg.norm(Phi, axis=0)


# -- acceptance summary -------------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number_title = _CRITERION_OF.get(report.nodeid)
        if number_title:
            prev = _CRITERIA.get(number_title, "passed")
            _CRITERIA[number_title] = "passed" if prev == "passed" and report.passed else "failed"


_CRITERION_OF = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _CRITERION_OF[item.nodeid] = mark.args


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), outcome in sorted(_CRITERIA.items()):
        tag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{tag}] {number}. {title}")

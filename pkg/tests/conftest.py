import numpy as np
import pytest

from dsmil import _kernels_py, kernels
from dsmil.data import Bag, MILDataset

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, text): exit criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, text = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        _ACCEPTANCE.append((number, status, text, item.name))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    by_number = {}
    for number, status, text, name in _ACCEPTANCE:
        by_number.setdefault(number, (text, []))[1].append((status, name))
    for number in sorted(by_number):
        text, results = by_number[number]
        statuses = {s for s, _ in results}
        status = "FAIL" if "FAIL" in statuses else "PASS" if "PASS" in statuses else "SKIP"
        names = ", ".join(n for _, n in results)
        terminalreporter.write_line(f"[{status}] criterion {number}: {text} ({names})")


@pytest.fixture(params=["cython", "python"])
def backend(request, monkeypatch):
    """Run a test once per kernel backend (the compiled one only if built)."""
    if request.param == "cython":
        if kernels.BACKEND != "cython":
            pytest.skip("compiled kernel not built")
    else:
        monkeypatch.setattr(kernels, "min_dist_tables", _kernels_py.min_dist_tables)
    return request.param


def make_bag(bag_id, rows, label=1):
    return Bag(bag_id, np.asarray(rows, dtype=float), label)


@pytest.fixture
def two_bags():
    return make_bag("i", [[0, 0], [1, 0]], 1), make_bag("j", [[0, 1]], -1)


def random_dataset(rng, n_bags=6, d=3, max_size=5, prefix="b"):
    bags = []
    for i in range(n_bags):
        n = int(rng.integers(1, max_size + 1))
        bags.append(Bag(f"{prefix}{i}", rng.normal(size=(n, d)), 1 if i % 2 == 0 else -1))
    return MILDataset(tuple(bags), "random")

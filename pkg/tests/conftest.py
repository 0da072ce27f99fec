import numpy as np
import pytest

from symaccel.data import standardize, synth_logistic
from symaccel.model import SigmaModel
from symaccel.objectives import LogisticRegressionObjective, QuadraticObjective


@pytest.fixture
def model2():
    return SigmaModel(2.0)


@pytest.fixture
def half_square():
    """f(x) = x^2 / 2 in one dimension."""
    return QuadraticObjective([0.0], [1.0])


@pytest.fixture
def small_logistic():
    ds = synth_logistic(3, 20, 5, 2.0)
    return LogisticRegressionObjective.from_dataset(ds)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def standardized_synth7():
    ds, _, _ = standardize(synth_logistic(7, 200, 5, 4.0))
    return ds


# ---- acceptance reporting: one PASS/FAIL line per criterion ------------------------------------

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.fixture
def detail(request):
    """Attach a short measurement string to the current acceptance test."""

    def add(text):
        request.node.user_properties.append(("detail", text))

    return add


def pytest_runtest_logreport(report):
    if report.when != "call" and report.outcome != "failed":
        return
    num = dict(report.user_properties).get("criterion")
    if num is None:
        return
    entry = _CRITERIA.setdefault(num, {"ok": True, "details": []})
    entry["ok"] &= report.outcome == "passed"
    entry["details"] += [v for k, v in report.user_properties if k == "detail"]


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        item.user_properties.append(("criterion", mark.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {status}")
        for d in entry["details"]:
            terminalreporter.write_line(f"    {d}")

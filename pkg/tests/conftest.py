import json
import time

import numpy as np
import pytest

from squatjump import harness
from squatjump.multibody import icub_sagittal

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA[mark.args[0]] = (mark.args[1], "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, verdict = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {verdict}  {title}")


@pytest.fixture(scope="session")
def model():
    return icub_sagittal()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bundled_runs(tmp_path_factory):
    """Every bundled scenario run twice through the harness (artifacts kept for comparison)."""
    out = {}
    for path in harness.bundled_scenarios():
        name = path.stem
        rec = {"codes": [], "seconds": [], "dirs": [], "lines": []}
        for k in range(2):
            d = tmp_path_factory.mktemp(f"{name}_{k}")
            t0 = time.perf_counter()
            code = harness.run_scenario(harness.load_scenario(path), d, echo=rec["lines"].append)
            rec["seconds"].append(time.perf_counter() - t0)
            rec["codes"].append(code)
            rec["dirs"].append(d)
        rec["summary"] = json.loads((rec["dirs"][0] / "summary.json").read_text())
        out[name] = rec
    return out


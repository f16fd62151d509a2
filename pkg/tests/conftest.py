import logging
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_bundle():
    from hurricast.synthetic import make_bundle

    return make_bundle(seed=0)


@pytest.fixture(scope="session")
def synthetic_data(synthetic_bundle):
    return synthetic_bundle.backtest_data()


@pytest.fixture(autouse=True)
def _quiet_logs():
    logging.getLogger("hurricast").setLevel(logging.ERROR)
    yield


# -- acceptance reporting -----------------------------------------------------

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion (shown in the run summary)."""

    def report(criterion: str, passed: bool | None, detail: str) -> bool | None:
        verdict = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        line = f"[{verdict}] criterion {criterion}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)

import sys

import numpy as np
import pytest

from pdsplit.data import synth_lasso, synth_logistic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_logistic():
    return synth_logistic(3, 40, 6, 3, 1.0)


@pytest.fixture(scope="session")
def small_lasso():
    return synth_lasso(4, 30, 8, 3, 0.1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)

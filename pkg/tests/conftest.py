import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def diag(*xs):
    return np.diag(np.asarray(xs, dtype=complex))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])

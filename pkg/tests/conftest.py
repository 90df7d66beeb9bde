import logging

import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _quiet_lambda_warning():
    # several toys use lambda = 0 on purpose
    logging.getLogger("extremesim.objective").setLevel(logging.ERROR)
    yield
    logging.getLogger("extremesim.objective").setLevel(logging.NOTSET)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rel(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

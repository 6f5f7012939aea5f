import numpy as np
import pytest

from diradopt import Technology, WorkerJob


def random_worker(rng, n=None, lo=0.3, hi=5.0, budget=1.0):
    """Worker with theta, s in [0.3, 3] and sigma, gamma in [lo, hi], sigma kept away from 1."""
    n = int(rng.integers(2, 7)) if n is None else n
    while True:
        sigma = rng.uniform(lo, hi)
        if abs(sigma - 1.0) > 0.05:
            break
    return WorkerJob(rng.uniform(0.3, 3.0, n), rng.uniform(0.3, 3.0, n), sigma, rng.uniform(lo, hi), budget)


def random_direction(rng, n, floor=0.05):
    d = rng.uniform(floor, 1.0, n)
    return d / np.linalg.norm(d)


@pytest.fixture
def symmetric():
    return WorkerJob(np.ones(2), np.ones(2), 2.0, 1.0)


@pytest.fixture
def canonical_tech():
    return Technology(np.array([0.8, 0.6]), 1.0167)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.REPORT):
        terminalreporter.write_line(module.REPORT[number].line())

"""Shared fixtures plus the acceptance-criterion summary printer."""

import numpy as np
import pytest

from tokmerge.rng import Rng


@pytest.fixture
def rng():
    return Rng(1234)


def random_row_stochastic(rng: Rng, n: int) -> np.ndarray:
    """Row-stochastic matrix via softmax of Gaussian scores."""
    scores = rng.normal(n * n).reshape(n, n)
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


_acceptance_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance" in item.nodeid:
        _acceptance_results.append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed in _acceptance_results:
        label = name.removeprefix("test_")
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {label}")

import warnings

import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _quiet_constant_coordinates():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*constant coordinate")
        yield


@pytest.fixture
def separated_pairs():
    from spillover.data import Dataset

    return Dataset(np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]))


def partition(labels):
    """Label-free view of a 2-way clustering."""
    labels = np.asarray(labels)
    return frozenset(frozenset(np.flatnonzero(labels == k).tolist()) for k in np.unique(labels))


VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from blockmarkov import PartitionedModel  # noqa: E402

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical or acceptance test")


@pytest.fixture
def record_criterion():
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def record(number, name, passed, detail=""):
        _ACCEPTANCE[number] = (name, bool(passed), detail)
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        name, passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}")


@pytest.fixture
def gilbert():
    return PartitionedModel.build(("0", "1"), (1, 1), [[0.9, 0.1], [0.5, 0.5]])


@pytest.fixture
def diag_model():
    T = [[0.95, 0.0, 0.05],
         [0.0, 0.92, 0.08],
         [0.30, 0.60, 0.10]]
    return PartitionedModel.build(("0", "1"), (2, 1), T, kind="general")


@pytest.fixture
def coupled_model():
    T = [[0.93, 0.02, 0.05],
         [0.01, 0.95, 0.04],
         [0.45, 0.45, 0.10]]
    return PartitionedModel.build(("0", "1"), (2, 1), T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

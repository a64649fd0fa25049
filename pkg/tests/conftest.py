"""Shared helpers for the test suite."""

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def observed_order(err_coarse: float, err_fine: float, ratio: float = 2.0) -> float:
    """Convergence order between two resolutions differing by ``ratio``."""
    return float(np.log(err_coarse / err_fine) / np.log(ratio))

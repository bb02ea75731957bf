import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hsarma.series import ArmaParams, simulate  # noqa: E402


@pytest.fixture
def ar1_series():
    return simulate(ArmaParams([0.5], []), 4000, seed=11)


@pytest.fixture
def arma32():
    truth = ArmaParams([0.13, 0.42, -0.44], [-0.49, -0.34])
    return truth, simulate(truth, 4000, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

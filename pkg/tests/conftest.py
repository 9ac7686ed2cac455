import numpy as np
import pytest

from minefair import load_scenario
from minefair.scenario import bundled_scenario_path


@pytest.fixture(scope="session")
def bitcoin():
    return load_scenario(bundled_scenario_path())


def uniform_delays(n, d):
    m = np.full((n, n), float(d))
    np.fill_diagonal(m, 0.0)
    return m

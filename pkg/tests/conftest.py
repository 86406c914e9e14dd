import numpy as np
import pytest

from ringlab.sim import ScenarioConfig
from ringlab.triggers import load_dist

from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def scenario():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def dists():
    return {p.stem: load_dist(p) for p in (FIXTURES / "dists").glob("*.csv")}


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))

import numpy as np
import pytest

from fairliq.experiment import desk_scenario, paper_scenario


@pytest.fixture(scope="session")
def paper_params():
    return paper_scenario().market


@pytest.fixture(scope="session")
def desk_params():
    return desk_scenario().market


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)

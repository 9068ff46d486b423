import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240915)


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run the slow acceptance-scale tests",
    )

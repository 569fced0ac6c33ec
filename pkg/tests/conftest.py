import numpy as np
import pytest

from tailrule.data import RandomSource, TrialDataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def four_record_data():
    """Fixed 4-record dataset used by the hand-computed criterion oracles.

    A = [+1, +1, -1, -1], R = [1, 2, 3, 4], pi = 0.5 everywhere.
    """
    return TrialDataset(
        X=np.array([[0.0], [1.0], [2.0], [3.0]]),
        action=[1, 1, -1, -1],
        outcome=[1.0, 2.0, 3.0, 4.0],
        propensity=0.5,
    )


def random_dataset(gen, n, p=3, propensity=None):
    """Random but valid dataset for property tests."""
    X = gen.normal(size=(n, p))
    action = gen.choice([-1, 1], size=n)
    outcome = gen.normal(size=n) * (1.0 + gen.random(n))
    if propensity is None:
        propensity = gen.uniform(0.2, 0.8, size=n)
    return TrialDataset(X, action, outcome, propensity)


@pytest.fixture
def source():
    return RandomSource(2024, 0)

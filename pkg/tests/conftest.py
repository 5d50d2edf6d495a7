import numpy as np
import pytest

from catflow import DatasetStore


@pytest.fixture
def two_rows():
    # rows (0,0) and (0,1); with z=(0,0) and kappa=0.5 the weights are [3/4, 1/4]
    return DatasetStore(np.array([[0, 0], [0, 1]]), 2)


def random_store(rng, M, N, K):
    return DatasetStore(rng.integers(0, K, (M, N)), K)

import math

import numpy as np
import pytest

from catflow.core import ConfigError, DatasetStore, DomainError, SeedSpec
from catflow.kernel import (
    LIMIT,
    hamming,
    hamming_profile,
    log_gamma,
    membership,
    partition_subsets,
    posterior_weights,
)


def test_hamming():
    assert hamming([0, 1, 2], [0, 1, 2]) == 0
    assert hamming([0, 1, 2], [1, 1, 0]) == 2
    with pytest.raises(DomainError):
        hamming([0, 1], [0, 1, 2])


def test_profile_examples(two_rows):
    np.testing.assert_array_equal(hamming_profile(two_rows, [0, 0]), [0, 1])
    one = DatasetStore(np.array([[0, 0]]), 2)
    np.testing.assert_array_equal(hamming_profile(one, [1, 1]), [2])


def test_profile_length_large():
    ds = DatasetStore(np.random.default_rng(0).integers(0, 40, (127190, 32)), 40)
    assert hamming_profile(ds, ds.rows[5]).shape == (127190,)


def test_log_gamma_examples():
    assert log_gamma(0.0, 7) == 0.0
    assert log_gamma(0.5, 2) == pytest.approx(math.log(3), abs=1e-15)
    assert log_gamma(1.0, 2) == LIMIT
    with pytest.raises(DomainError):
        log_gamma(1.5, 2)


def test_posterior_weight_examples():
    np.testing.assert_allclose(posterior_weights([3, 0, 5, 1], 0.0), [0.25] * 4)
    np.testing.assert_allclose(posterior_weights([0, 1], math.log(3)), [0.75, 0.25], atol=1e-15)
    np.testing.assert_array_equal(posterior_weights([2, 1, 1], LIMIT), [0, 0.5, 0.5])


def test_posterior_weights_extreme_gamma_stays_finite():
    w = posterior_weights(np.array([400, 401, 900]), 50.0)
    assert np.all(np.isfinite(w))
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert w[0] == pytest.approx(1.0)


def test_partition_examples():
    ds = DatasetStore(np.arange(10).reshape(5, 2) % 2, 2)
    (only,) = partition_subsets(ds, 1, SeedSpec(0))
    np.testing.assert_array_equal(only.indices, np.arange(5))
    views = partition_subsets(ds, 2, SeedSpec(0))
    assert sorted(v.M for v in views) == [2, 3]
    with pytest.raises(ConfigError):
        partition_subsets(ds, 6, SeedSpec(0))
    with pytest.raises(ConfigError):
        partition_subsets(ds, 0, SeedSpec(0))


def test_partition_is_disjoint_cover_and_seeded():
    ds = DatasetStore(np.random.default_rng(2).integers(0, 3, (101, 4)), 3)
    views = partition_subsets(ds, 8, SeedSpec(11))
    mem = membership(views, ds.M)
    assert np.all(mem >= 0)
    assert sum(v.M for v in views) == ds.M
    assert max(v.M for v in views) - min(v.M for v in views) <= 1
    for v in views:
        np.testing.assert_array_equal(v.store.rows, ds.rows[v.indices])
    again = membership(partition_subsets(ds, 8, SeedSpec(11)), ds.M)
    np.testing.assert_array_equal(mem, again)

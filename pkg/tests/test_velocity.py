import numpy as np
import pytest

from catflow.core import ConfigError, DatasetStore, Scheduler
from catflow.velocity import (
    SingularityError,
    agreement,
    denoiser_forward,
    noise_predictor,
    oracle_denoiser,
    oracle_noise_predictor,
    velocity_backward,
    velocity_forward,
)

from conftest import random_store

LIN = Scheduler()


def test_denoiser_example(two_rows):
    p = denoiser_forward(two_rows, [0, 0], 0.5).values
    np.testing.assert_allclose(p, [[1, 0], [0.75, 0.25]], atol=1e-15)
    np.testing.assert_allclose(oracle_denoiser(two_rows, [0, 0], 0.5).values, p, atol=1e-15)


def test_denoiser_at_zero_is_empirical_marginal():
    ds = random_store(np.random.default_rng(0), 7, 3, 3)
    p = denoiser_forward(ds, [1, 2, 0], 0.0).values
    for i in range(3):
        np.testing.assert_allclose(p[i], np.bincount(ds.rows[:, i], minlength=3) / 7)


def test_denoiser_single_row_is_onehot():
    ds = DatasetStore(np.array([[2, 0, 1]]), 3)
    for k in (0.0, 0.3, 0.99, 1.0):
        np.testing.assert_array_equal(denoiser_forward(ds, [0, 0, 0], k).values,
                                      np.eye(3)[[2, 0, 1]])


def test_forward_velocity_example(two_rows):
    v = velocity_forward(two_rows, [0, 0], 0.5, LIN).values
    np.testing.assert_allclose(v, [[0, 0], [-0.5, 0.5]], atol=1e-15)


def test_forward_velocity_zero_at_data():
    ds = DatasetStore(np.array([[1, 0, 1]]), 2)
    for t in (0.0, 0.4, 0.9):
        assert not velocity_forward(ds, [1, 0, 1], t, LIN).values.any()


def test_forward_velocity_singular_at_one(two_rows):
    with pytest.raises(SingularityError):
        velocity_forward(two_rows, [0, 0], 1.0, LIN)


def test_noise_predictor_example(two_rows):
    # brute-force enumeration over the four source sequences
    p = noise_predictor(two_rows, [0, 0], 0.5).values
    np.testing.assert_allclose(p, [[2 / 3, 1 / 3], [3 / 4, 1 / 4]], atol=1e-15)
    np.testing.assert_allclose(oracle_noise_predictor(two_rows, [0, 0], 0.5).values, p, atol=1e-15)


def test_noise_predictor_limits():
    ds = DatasetStore(np.array([[0, 2]]), 3)
    np.testing.assert_array_equal(noise_predictor(ds, [1, 2], 0.0).values, np.eye(3)[[1, 2]])
    np.testing.assert_allclose(noise_predictor(ds, [0, 2], 1.0).values, np.full((2, 3), 1 / 3))


def test_backward_velocity_example(two_rows):
    v = velocity_backward(two_rows, [0, 0], 0.5, LIN).values
    # kappa_dot / (1 + kappa) * s_i with s = [1, 3/4]
    np.testing.assert_allclose(v, [[2 / 3, -2 / 3], [0.5, -0.5]], atol=1e-15)


def test_backward_velocity_zero_without_agreement():
    ds = DatasetStore(np.array([[1, 1], [1, 0]]), 2)
    v = velocity_backward(ds, [0, 0], 0.3, LIN).values
    assert not v[0].any()
    assert v[1].any()


def test_agreement_sentinel_uses_nearest_rows():
    ds = DatasetStore(np.array([[0, 0, 0], [1, 1, 1], [0, 0, 1]]), 2)
    np.testing.assert_allclose(agreement(ds, [0, 0, 0], 1.0), [1, 1, 1])
    np.testing.assert_allclose(agreement(ds, [0, 1, 1], 1.0), [0.5, 0.5, 1])


@pytest.mark.parametrize("k", [0.0, 0.25, 0.5, 0.9])
def test_closed_forms_match_oracle(k):
    rng = np.random.default_rng(3)
    for _ in range(20):
        ds = random_store(rng, int(rng.integers(1, 6)), int(rng.integers(1, 5)), int(rng.integers(2, 4)))
        z = rng.integers(0, ds.K, ds.N)
        np.testing.assert_allclose(denoiser_forward(ds, z, k).values,
                                   oracle_denoiser(ds, z, k).values, atol=1e-12)
        np.testing.assert_allclose(noise_predictor(ds, z, k).values,
                                   oracle_noise_predictor(ds, z, k).values, atol=1e-12)


def test_oracle_size_guard():
    ds = DatasetStore(np.zeros((1, 30), int), 2)
    with pytest.raises(ConfigError):
        oracle_denoiser(ds, np.zeros(30, int), 0.5)


def test_velocity_rows_sum_to_zero():
    rng = np.random.default_rng(5)
    ds = random_store(rng, 50, 12, 6)
    z = rng.integers(0, 6, 12)
    for t in (0.0, 0.3, 0.97):
        assert np.abs(velocity_forward(ds, z, t, LIN).row_sums()).max() < 1e-12
    for t in (0.0, 0.3, 1.0):
        assert np.abs(velocity_backward(ds, z, t, LIN).row_sums()).max() < 1e-12

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import special_ortho_group

from catflow.continuous import PointSet, chamfer, velocity_gaussian
from catflow.core import DatasetStore, load_dataset, write_dataset
from catflow.kernel import hamming, log_gamma, posterior_weights
from catflow.transport import PairSet, decode_pairs, encode_pairs
from catflow.velocity import (
    denoiser_forward,
    noise_predictor,
    oracle_denoiser,
    oracle_noise_predictor,
)

kappas = st.floats(0.0, 1.0)


@st.composite
def stores(draw, max_n=6, max_k=5, max_m=8):
    K = draw(st.integers(2, max_k))
    N = draw(st.integers(1, max_n))
    M = draw(st.integers(1, max_m))
    rows = draw(arrays(np.int64, (M, N), elements=st.integers(0, K - 1)))
    z = draw(arrays(np.int64, N, elements=st.integers(0, K - 1)))
    return DatasetStore(rows, K), z


@given(stores(), kappas)
def test_posteriors_are_distributions(case, k):
    ds, z = case
    for grid in (denoiser_forward(ds, z, k), noise_predictor(ds, z, k)):
        assert grid.values.min() >= -1e-15
        np.testing.assert_allclose(grid.row_sums(), 1.0, atol=1e-12)


@settings(max_examples=60)
@given(stores(max_n=4, max_k=3, max_m=5), st.floats(0.0, 0.95))
def test_closed_form_equals_enumeration(case, k):
    ds, z = case
    np.testing.assert_allclose(denoiser_forward(ds, z, k).values,
                               oracle_denoiser(ds, z, k).values, atol=1e-10)
    np.testing.assert_allclose(noise_predictor(ds, z, k).values,
                               oracle_noise_predictor(ds, z, k).values, atol=1e-10)


@given(arrays(np.int64, 2 * 7, elements=st.integers(0, 3)), arrays(np.int64, 7, elements=st.integers(0, 3)))
def test_hamming_metric(ab, c):
    a, b = ab[:7], ab[7:]
    assert hamming(a, b) == hamming(b, a)
    assert hamming(a, a) == 0
    assert hamming(a, c) <= hamming(a, b) + hamming(b, c)


@given(arrays(np.int64, st.integers(1, 30), elements=st.integers(0, 500)), kappas, st.integers(2, 256))
def test_weights_normalized(profile, k, K):
    w = posterior_weights(profile, log_gamma(k, K))
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) < 1e-12
    # nearer rows never weigh less
    order = np.argsort(profile, kind="stable")
    assert np.all(np.diff(w[order]) <= 1e-15)


@settings(max_examples=25, deadline=None)
@given(stores(max_n=10, max_k=300, max_m=20))
def test_dataset_roundtrip(tmp_path_factory, case):
    ds, _ = case
    p = tmp_path_factory.mktemp("rt") / "d.dtok"
    write_dataset(ds, p)
    assert load_dataset(p).rows.tobytes() == ds.rows.tobytes()


@settings(max_examples=25)
@given(stores(max_n=8, max_m=10), st.integers(0, 2**64 - 1), st.integers(1, 100))
def test_pair_codec_roundtrip(case, seed, T):
    ds, _ = case
    M = ds.M
    ps = PairSet(ds.rows[::-1].copy(), ds.rows.copy(), np.arange(M, dtype=np.uint64),
                 np.zeros(M, np.uint32), ds.K, seed=seed, T=T)
    data = encode_pairs(ps)
    assert encode_pairs(decode_pairs(data)) == data


finite = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=40)
@given(arrays(np.float64, (6, 3), elements=finite), arrays(np.float64, 3, elements=finite),
       arrays(np.float64, 3, elements=finite), st.floats(0.0, 0.95), st.integers(0, 10**6))
def test_velocity_equivariance(d, x, c, t, seed):
    ps = PointSet(d)
    v = velocity_gaussian(ps, x, t)
    # a constant shift c of data and query: differences d - x are unchanged only
    # when the query is moved along the path, x -> x + t c
    shifted = velocity_gaussian(PointSet(d + c), x + t * c, t)
    np.testing.assert_allclose(shifted, v + c, atol=1e-8)
    Q = special_ortho_group.rvs(3, random_state=seed)
    np.testing.assert_allclose(velocity_gaussian(PointSet(d @ Q.T), Q @ x, t), Q @ v, atol=1e-8)


@given(arrays(np.float64, (5, 2), elements=finite), arrays(np.float64, (4, 2), elements=finite))
def test_chamfer_symmetric(a, b):
    a, b = PointSet(a), PointSet(b)
    assert chamfer(a, a) == 0.0
    assert chamfer(a, b) == chamfer(b, a)
    assert chamfer(a, b) >= 0

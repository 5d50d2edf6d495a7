import math

import numpy as np
import pytest

from catflow.core import (
    ConfigError,
    DatasetStore,
    DomainError,
    LoadError,
    Scheduler,
    SeedSpec,
    TimeGrid,
    as_tokens,
    compact_dtype,
    kappa,
    kappa_dot,
    load_dataset,
    read_dtok_header,
    write_csv,
    write_dataset,
    write_tokens,
)

SCHEDULERS = [Scheduler(), Scheduler("cosine"), Scheduler("polynomial", 2.0), Scheduler("polynomial", 0.5)]


def test_kappa_examples():
    assert kappa(Scheduler(), 0.0) == 0.0
    assert kappa(Scheduler(), 0.5) == 0.5
    assert kappa(Scheduler("cosine"), 0.5) == pytest.approx(0.5, abs=1e-15)


def test_kappa_dot_examples():
    for t in (0.0, 0.3, 1.0):
        assert kappa_dot(Scheduler(), t) == 1.0
    assert kappa_dot(Scheduler("polynomial", 2.0), 0.5) == 1.0
    assert kappa_dot(Scheduler("cosine"), 0.0) == 0.0


@pytest.mark.parametrize("s", SCHEDULERS, ids=str)
def test_endpoints_exact(s):
    assert kappa(s, 0.0) == 0.0
    assert kappa(s, 1.0) == 1.0


@pytest.mark.parametrize("t", [-0.1, 1.0001, math.nan])
def test_kappa_domain(t):
    with pytest.raises(DomainError):
        kappa(Scheduler(), t)
    with pytest.raises(DomainError):
        kappa_dot(Scheduler(), t)


@pytest.mark.parametrize("s", SCHEDULERS, ids=str)
def test_kappa_monotone(s):
    t = np.linspace(0, 1, 1001)
    k = np.array([kappa(s, x) for x in t])
    assert np.all(np.diff(k) > 0)


@pytest.mark.parametrize("s", SCHEDULERS, ids=str)
def test_kappa_dot_matches_finite_difference(s):
    eps = 1e-6
    for t in np.linspace(0.05, 0.95, 19):
        fd = (kappa(s, t + eps) - kappa(s, t - eps)) / (2 * eps)
        assert fd == pytest.approx(kappa_dot(s, t), abs=1e-6)


def test_scheduler_parse():
    assert Scheduler.parse("linear") == Scheduler()
    assert Scheduler.parse("polynomial:3") == Scheduler("polynomial", 3.0)
    assert str(Scheduler.parse("polynomial:2.5")) == "polynomial:2.5"
    with pytest.raises(ConfigError):
        Scheduler.parse("quadratic")
    with pytest.raises(ConfigError):
        Scheduler.parse("cosine:2")
    with pytest.raises(ConfigError):
        Scheduler("polynomial", 0.0)


def test_polynomial_rate_at_zero():
    assert kappa_dot(Scheduler("polynomial", 2.0), 0.0) == 0.0
    assert math.isinf(kappa_dot(Scheduler("polynomial", 0.5), 0.0))


def test_time_grid():
    f = TimeGrid(4)
    np.testing.assert_array_equal(f.nodes, [0, 0.25, 0.5, 0.75, 1])
    b = TimeGrid(4, "backward")
    np.testing.assert_array_equal(b.nodes, [1, 0.75, 0.5, 0.25, 0])
    assert b.h == 0.25
    with pytest.raises(ConfigError):
        TimeGrid(0)


def test_seed_streams_independent_of_order():
    s = SeedSpec(7)
    a = s.stream(3).random(4)
    s.stream(1).random(100)
    np.testing.assert_array_equal(a, s.stream(3).random(4))
    assert not np.array_equal(a, s.stream(4).random(4))
    assert not np.array_equal(a, s.stream(3, purpose=1).random(4))
    assert not np.array_equal(a, SeedSpec(8).stream(3).random(4))


def test_compact_dtype():
    assert compact_dtype(2) == np.uint8
    assert compact_dtype(256) == np.uint8
    assert compact_dtype(257) == np.uint16
    assert compact_dtype(2**17) == np.uint32


def test_as_tokens():
    np.testing.assert_array_equal(as_tokens([1, 0, 2], 3), [1, 0, 2])
    with pytest.raises(DomainError):
        as_tokens([3], 3)
    with pytest.raises(DomainError):
        as_tokens([0, 1], 3, N=3)


def test_store_is_immutable():
    ds = DatasetStore(np.array([[0, 1], [1, 1]]), 2)
    assert (ds.M, ds.N, ds.K) == (2, 2, 2)
    with pytest.raises(ValueError):
        ds.rows[0, 0] = 1
    with pytest.raises(LoadError):
        DatasetStore(np.array([[0, 2]]), 2)


def test_csv_example(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0,1\n1,0\n0,0\n")
    ds = load_dataset(p, K=2)
    assert (ds.N, ds.K, ds.M) == (2, 2, 3)


def test_csv_out_of_range_names_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0,1\n1,5\n")
    with pytest.raises(LoadError, match="row 1"):
        load_dataset(p, K=4)


def test_csv_ragged_and_needs_k(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0,1\n1\n")
    with pytest.raises(LoadError, match="row 1"):
        load_dataset(p, K=2)
    with pytest.raises(LoadError):
        load_dataset(p)


def test_dtok_roundtrip_qm9_shape_header(tmp_path):
    rows = np.random.default_rng(0).integers(0, 40, (1000, 32))
    p = tmp_path / "q.dtok"
    write_tokens(p, rows, 40)
    assert read_dtok_header(p) == (32, 40, 1000)
    ds = load_dataset(p)
    np.testing.assert_array_equal(ds.rows, rows)
    assert p.stat().st_size == 4 + 1 + 4 + 4 + 8 + 4 * rows.size


def test_dtok_malformed(tmp_path):
    p = tmp_path / "bad.dtok"
    p.write_bytes(b"DTOX" + bytes(17))
    with pytest.raises(LoadError, match="magic"):
        load_dataset(p)
    good = tmp_path / "g.dtok"
    write_tokens(good, np.zeros((3, 4), int), 2)
    data = good.read_bytes()
    p.write_bytes(data[:-5])
    with pytest.raises(LoadError, match="row 2"):
        load_dataset(p)
    p.write_bytes(data[:10])
    with pytest.raises(LoadError, match="truncated"):
        load_dataset(p)


def test_dtok_token_out_of_range(tmp_path):
    p = tmp_path / "r.dtok"
    write_tokens(p, np.array([[0, 1], [3, 0]]), 2)
    with pytest.raises(LoadError, match="row 1"):
        load_dataset(p)


def test_csv_and_dtok_agree(tmp_path):
    rows = np.random.default_rng(1).integers(0, 5, (20, 6))
    ds = DatasetStore(rows, 5)
    write_dataset(ds, tmp_path / "a.dtok")
    write_csv(ds.rows, tmp_path / "a.csv")
    a = load_dataset(tmp_path / "a.dtok")
    b = load_dataset(tmp_path / "a.csv", K=5)
    assert a.rows.tobytes() == b.rows.tobytes()

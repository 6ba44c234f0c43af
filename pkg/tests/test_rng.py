import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from cml import rng
from cml.parallel import chunks, map_ranges, thread_count

u64 = st.integers(0, 2 ** 64 - 1)


@given(u64, st.integers(0, 2 ** 40))
def test_hash_is_pure(seed, word):
    assert rng.hash64(seed, 1, word) == rng.hash64(seed, 1, word)


def test_broadcast_matches_scalar_calls():
    ids = np.arange(50)
    batch = rng.uniform(5, rng.Stream.SLIT, ids[:, None], np.arange(3))
    for i in (0, 17, 49):
        for j in range(3):
            assert batch[i, j] == rng.uniform(5, rng.Stream.SLIT, i, j)


def test_streams_differ():
    a = rng.uniform(1, rng.Stream.MALUS, np.arange(1000))
    b = rng.uniform(1, rng.Stream.CHAIN, np.arange(1000))
    assert not np.any(a == b)


def test_uniform_and_normal_distributions():
    u = rng.uniform(42, 0, np.arange(200_000))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 0.001
    z = rng.normal(42, 1, np.arange(200_000))
    assert stats.kstest(z, "norm").pvalue > 0.001


def test_rejects_bad_words():
    with pytest.raises(TypeError):
        rng.hash64(1, 0.5)
    with pytest.raises(ValueError):
        rng.hash64(1, -3)


def test_generator_keyed():
    a = rng.generator(3, 4, 5).normal(size=10)
    b = rng.generator(3, 4, 5).normal(size=10)
    c = rng.generator(3, 4, 6).normal(size=10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_chunks_cover_range():
    assert chunks(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert chunks(0, 4) == []


def test_map_ranges_order_independent_of_threads(monkeypatch):
    fn = lambda a, b: rng.uniform(9, np.arange(a, b)).sum()
    monkeypatch.setenv("CML_THREADS", "1")
    one = map_ranges(fn, 1000, 64)
    monkeypatch.setenv("CML_THREADS", "3")
    assert thread_count() == 3
    three = map_ranges(fn, 1000, 64)
    assert one == three


def test_thread_count_validation(monkeypatch):
    monkeypatch.setenv("CML_THREADS", "0")
    with pytest.raises(ValueError):
        thread_count()
    monkeypatch.delenv("CML_THREADS")
    assert thread_count() >= 1

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from convsw.errors import ShapeError
from convsw.tensor import (
    RandomSource, as_measure, as_tensor3, devectorize, sample_unit_tensor, vectorize,
)


@pytest.mark.parametrize("c", [1, 3])
@pytest.mark.parametrize("k", [1, 2, 7, 15, 17])
def test_unit_tensor_norm(c, k):
    t = sample_unit_tensor((c, k, k), RandomSource(7).substream(k))
    assert t.shape == (c, k, k)
    assert abs(np.sqrt(np.sum(t * t)) - 1.0) < 1e-12


def test_unit_tensor_deterministic():
    a = sample_unit_tensor((1, 2, 2), RandomSource(3).substream(5))
    b = sample_unit_tensor((1, 2, 2), RandomSource(3).substream(5))
    assert np.array_equal(a, b)


def test_unit_tensor_entry_mean_is_zero():
    gen = np.random.default_rng(11)
    draws = np.array([sample_unit_tensor((1, 2, 2), gen)[0, 1, 0] for _ in range(100_000)])
    assert abs(draws.mean()) < 0.02


def test_unit_tensor_rejects_bad_shape():
    with pytest.raises(ShapeError):
        sample_unit_tensor((0, 2, 2), np.random.default_rng(0))


def test_substreams_are_independent_of_interleaving():
    src = RandomSource(99)
    a, b = src.substream(1), src.substream(2)
    inter = []
    for _ in range(3):
        inter.append((a.standard_normal(), b.standard_normal()))
    solo_a = src.substream(1).standard_normal(3)
    solo_b = src.substream(2).standard_normal(3)
    assert np.array_equal([v[0] for v in inter], solo_a)
    assert np.array_equal([v[1] for v in inter], solo_b)


def test_random_source_seed_range():
    RandomSource(2**64 - 1).substream(0)
    with pytest.raises(ValueError):
        RandomSource(-1)


def test_vectorize_row_major():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    assert vectorize(x).tolist() == [1.0, 2.0, 3.0, 4.0]
    assert np.array_equal(vectorize(np.zeros((3, 4, 4))), np.zeros(48))


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(1, 6)).map(
    lambda t: (t[0], t[1], t[1])), elements=st.floats(-1e6, 1e6)))
def test_vectorize_roundtrip_exact(x):
    assert np.array_equal(devectorize(vectorize(x), x.shape), x)


def test_validation():
    with pytest.raises(ShapeError):
        as_tensor3(np.zeros((1, 2, 3)))
    with pytest.raises(ShapeError):
        as_tensor3(np.array([[[np.nan]]]))
    with pytest.raises(ShapeError):
        as_measure(np.zeros((0, 1, 2, 2)))
    assert as_measure(np.zeros((1, 2, 2))).shape == (1, 1, 2, 2)

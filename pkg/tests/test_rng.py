import numpy as np
import pytest

from drsk.rng import as_rng, make_rng


def test_same_key_same_stream():
    a = make_rng(7, 3, 1).random(5)
    b = make_rng(7, 3, 1).random(5)
    assert np.array_equal(a, b)


def test_distinct_keys_give_distinct_streams():
    assert not np.array_equal(make_rng(7, 3, 1).random(5), make_rng(7, 3, 2).random(5))
    assert not np.array_equal(make_rng(7).random(5), make_rng(8).random(5))


def test_stream_does_not_depend_on_creation_order():
    later = make_rng(1, 5).random(3)
    for k in range(5):
        make_rng(1, k).random(100)
    assert np.array_equal(make_rng(1, 5).random(3), later)


@pytest.mark.parametrize("seed", [-1, None])
def test_invalid_seed_rejected(seed):
    with pytest.raises(ValueError):
        make_rng(seed)


def test_as_rng_passes_generators_through():
    g = make_rng(0)
    assert as_rng(g) is g
    assert np.array_equal(as_rng(4).random(2), make_rng(4).random(2))

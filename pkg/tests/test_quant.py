import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cimprune.quant import (
    NibblePlanes,
    as_token,
    from_bitplane,
    split_nibbles,
    to_bitplane,
)


def _one(x):
    v = np.zeros(64, dtype=np.int8)
    v[0] = x
    p = split_nibbles(v)
    return int(p.msb[0]), int(p.lsb[0])


@pytest.mark.parametrize("x, msb, lsb", [(90, 5, 10), (-90, -6, 6), (0, 0, 0), (-128, -8, 0), (127, 7, 15), (-1, -1, 15)])
def test_split_examples(x, msb, lsb):
    assert _one(x) == (msb, lsb)


@pytest.mark.parametrize("m, bits", [(-8, [0, 0, 0, 1]), (7, [1, 1, 1, 0]), (-1, [1, 1, 1, 1]), (0, [0, 0, 0, 0])])
def test_bitplane_examples(m, bits):
    msb = np.full(64, m, dtype=np.int8)
    bp = to_bitplane(msb)
    assert bp.shape == (64, 4)
    assert bp[0].tolist() == bits
    assert np.array_equal(from_bitplane(bp), msb)


def test_round_trip_exhaustive():
    xs = np.arange(-128, 128)
    for chunk in xs.reshape(4, 64):
        p = split_nibbles(chunk)
        assert np.array_equal(16 * p.msb.astype(int) + p.lsb, chunk)
        assert p.lsb.min() >= 0 and p.lsb.max() <= 15
        assert p.msb.min() >= -8 and p.msb.max() <= 7
        assert np.array_equal(p.reconstruct(), chunk)


def test_msb_monotone():
    msb = np.concatenate([split_nibbles(c).msb for c in np.arange(-128, 128).reshape(4, 64)])
    assert np.all(np.diff(msb.astype(int)) >= 0)


@given(st.integers(-8, 7))
def test_bit_recombination(m):
    bits = to_bitplane(np.full(64, m, dtype=np.int8))[0]
    assert sum(w * int(b) for w, b in zip((1, 2, 4, -8), bits)) == m


def test_batched_split():
    x = np.arange(-128, 128).reshape(4, 64)
    p = split_nibbles(x)
    assert p.msb.shape == (4, 64)
    assert to_bitplane(p).shape == (4, 64, 4)


def test_validation():
    with pytest.raises(ValueError):
        as_token(np.zeros(63))
    with pytest.raises(ValueError):
        as_token(np.full(64, 128))
    with pytest.raises(ValueError):
        NibblePlanes(msb=np.full(64, 8), lsb=np.zeros(64))
    with pytest.raises(ValueError):
        NibblePlanes(msb=np.zeros(64), lsb=np.full(64, 16))

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cimprune.blp import (
    BwsState,
    SignedAccumulator,
    bws_step,
    compare,
    compare_many,
    score_token,
    score_tokens,
    term_sign,
    threshold_voltage,
)
from cimprune.cim_array import CimArray, NoiseModel, RblSample
from cimprune.quant import NibblePlanes, to_bitplane

W = (1, 2, 4, -8)


def run_bws(inputs):
    s = BwsState()
    for v in inputs:
        s = bws_step(s, v)
    return s.stored


@pytest.mark.parametrize("inputs, expect", [([1, 1, 1, 1], 0.9375), ([0, 0, 0, 0], 0.0), ([0.8, 0, 0, 0], 0.05)])
def test_bws_examples(inputs, expect):
    assert run_bws(inputs) == pytest.approx(expect, abs=1e-15)


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=12))
def test_bws_exactness(vs):
    k = len(vs)
    expect = sum(0.5 ** (k - i) * v for i, v in enumerate(vs))
    assert run_bws(vs) == pytest.approx(expect, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("b, c, s", [(3, 1, -1), (3, 3, 1), (0, 0, 1), (1, 3, -1), (2, 2, 1)])
def test_term_sign_examples(b, c, s):
    assert term_sign(b, c) == s


def test_term_sign_matches_weights():
    for b, c in itertools.product(range(4), repeat=2):
        assert term_sign(b, c) == np.sign(W[b] * W[c])
    with pytest.raises(ValueError):
        term_sign(4, 0)


def test_signed_accumulator_halves_both_rails():
    acc = SignedAccumulator(0.4, 0.2).store(1.0, -1)
    assert (acc.pos, acc.neg) == (0.2, 0.6)


def brute_differential(qmsb, kmsb, n_active, v_pre=1.0):
    """Independent oracle: explicit bit loops, popcounts and signed powers of two."""
    total = 0.0
    for b in range(4):
        for c in range(4):
            P = 0
            for n in range(64):
                qb = (int(qmsb[n]) & 15) >> b & 1
                kb = (int(kmsb[n]) & 15) >> c & 1
                P += qb & kb
            total += term_sign(b, c) * 2.0 ** (b + c - 8) * v_pre * P / n_active
    return total


def droops_for(qmsb, kmsb, sscs, v_pre=1.0):
    arr = CimArray(v_pre=v_pre, sscs=sscs)
    arr.write_key(0, NibblePlanes(msb=kmsb, lsb=np.zeros(64)))
    nz = (np.asarray(qmsb) != 0).astype(np.uint8)
    qbits = to_bitplane(np.asarray(qmsb))
    return np.stack([arr.cim_cycle(qbits[:, b], nz, b) for b in range(4)])  # (4, 1, 4)


def test_score_all_ones():
    q = np.ones(64, int)
    k = np.ones(64, int)
    expect = brute_differential(q, k, 64)
    assert expect == pytest.approx(64 / (256 * 64))
    d = droops_for(q, k, sscs=False)
    assert score_token(d[:, 0, :]) == pytest.approx(expect, abs=1e-15)
    assert score_tokens(d)[0] == pytest.approx(expect, abs=1e-15)


def test_score_single_element():
    q = np.zeros(64, int)
    k = np.zeros(64, int)
    q[0], k[0] = -8, 7
    expect = brute_differential(q, k, 1)
    assert expect == pytest.approx(-56 / 256)
    d = droops_for(q, k, sscs=True)
    assert score_token(d[:, 0, :]) == pytest.approx(-0.21875, abs=1e-15)


def test_zero_droops():
    assert score_token(np.zeros((4, 4))) == 0.0


def test_score_from_sample_list():
    arr = CimArray()
    arr.write_key(0, NibblePlanes(msb=np.full(64, 3), lsb=np.zeros(64)))
    q = np.full(64, -5)
    qbits = to_bitplane(q)
    samples = []
    for b in range(4):
        samples += arr.cim_cycle_samples(qbits[:, b], None, b)
    assert 256 * 64 * score_token(samples) == pytest.approx(64 * -15)
    with pytest.raises(ValueError):
        score_token(samples[:-1])
    with pytest.raises(ValueError):
        score_token(samples + [RblSample(9, 0, 0, 0.1)])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_weighting_identity_and_sign_symmetry(seed, sscs):
    rng = np.random.default_rng(seed)
    q = rng.integers(-8, 8, 64)
    q[rng.random(64) < rng.random()] = 0
    k = rng.integers(-7, 8, 64)  # -k stays representable
    n_active = int((q != 0).sum()) if sscs else 64
    if n_active == 0:
        return
    diff = score_token(droops_for(q, k, sscs)[:, 0, :])
    assert 256 * n_active * diff == pytest.approx(int(q @ k), abs=1e-9)
    neg = score_token(droops_for(q, -k, sscs)[:, 0, :])
    assert neg == pytest.approx(-diff, abs=1e-15)


def test_compare_examples():
    assert compare(0.01, 0.0).keep
    assert not compare(-0.01, 0.0).keep
    assert not compare(0.0, 0.0).keep
    assert not compare(0.125, 0.125).keep


def test_compare_noise_requires_rng():
    with pytest.raises(ValueError):
        compare(0.0, 0.0, NoiseModel(sigma_cmp=0.1))
    assert compare_many([0.1, -0.1], 0.0).tolist() == [True, False]


def test_threshold_voltage():
    assert threshold_voltage(256, 1.0, 64) == pytest.approx(1 / 64)
    assert threshold_voltage(float("-inf"), 1.0, 64) == float("-inf")

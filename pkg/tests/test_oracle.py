import pytest

from cimprune.oracle import (
    DeadzoneClass,
    deadzone_classifier,
    reference_attention,
    score4_bruteforce,
    score4_from_int8,
    score4_many,
    score8_bruteforce,
)


def test_score4_examples():
    assert score4_bruteforce([1] * 64, [1] * 64) == 64
    assert score4_bruteforce([-8] * 64, [7] * 64) == -3584
    assert score4_bruteforce(list(range(-8, 8)) * 4, [0] * 64) == 0
    with pytest.raises(ValueError):
        score4_bruteforce([1], [1, 2])


def test_score4_envelope():
    assert abs(score4_bruteforce([-8] * 64, [-8] * 64)) <= 16383


def test_score4_variants_agree(rng):
    q = rng.integers(-128, 128, 64)
    K = rng.integers(-128, 128, (5, 64))
    many = score4_many(q >> 4, K >> 4)
    for j in range(5):
        assert many[j] == score4_from_int8(q, K[j]) == score4_bruteforce(q >> 4, K[j] >> 4)
        assert score8_bruteforce(q, K[j]) == int(q @ K[j])


@pytest.mark.parametrize("score, theta, cls", [
    (300, 0, DeadzoneClass.MUST_KEEP),
    (-300, 0, DeadzoneClass.MUST_PRUNE),
    (100, 0, DeadzoneClass.DONT_CARE),
    (255, 0, DeadzoneClass.DONT_CARE),
    (-255, 0, DeadzoneClass.DONT_CARE),
    (256, 0, DeadzoneClass.MUST_KEEP),
    (-256, 0, DeadzoneClass.MUST_PRUNE),
    (600, 500, DeadzoneClass.DONT_CARE),
    (0, float("-inf"), DeadzoneClass.MUST_KEEP),
])
def test_deadzone(score, theta, cls):
    assert deadzone_classifier(score, theta) == cls


def test_reference_attention_examples(rng):
    v = rng.integers(-128, 128, 64).tolist()
    assert reference_attention([1] * 64, [[2] * 64], [v], 0.125) == pytest.approx(v)
    # keys with equal scores -> uniform weights
    k = [[1] + [0] * 63, [1] + [0] * 63, [1] + [5] * 63]
    q = [3] + [0] * 63
    V = rng.integers(-128, 128, (3, 64))
    assert reference_attention(q, k, V.tolist(), 0.125) == pytest.approx(V.mean(axis=0).tolist())


def test_reference_permutation_equivariant(rng):
    q = rng.integers(-128, 128, 64).tolist()
    K = rng.integers(-128, 128, (6, 64))
    V = rng.integers(-128, 128, (6, 64))
    perm = rng.permutation(6)
    a = reference_attention(q, K.tolist(), V.tolist(), 0.01)
    b = reference_attention(q, K[perm].tolist(), V[perm].tolist(), 0.01)
    assert a == pytest.approx(b, abs=1e-9)

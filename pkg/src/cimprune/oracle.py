"""Brute-force references that share no code with the analog or digital paths."""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

DEADZONE_HALF_WIDTH = 256


class DeadzoneClass(str, Enum):
    MUST_KEEP = "must_keep"
    MUST_PRUNE = "must_prune"
    DONT_CARE = "dont_care"


def _msb(x: int) -> int:
    return int(x) >> 4


def score4_bruteforce(q_msb, k_msb) -> int:
    """Direct integer dot product of two signed-nibble vectors."""
    q = getattr(q_msb, "msb", q_msb)
    k = getattr(k_msb, "msb", k_msb)
    if len(q) != len(k):
        raise ValueError("vector lengths differ")
    total = 0
    for a, b in zip(q, k):
        total += int(a) * int(b)
    return total


def score4_many(q_msb, k_msb) -> np.ndarray:
    """Vectorised integer score4 of one query nibble vector against (T, 64) key nibbles."""
    return np.asarray(k_msb, dtype=np.int64) @ np.asarray(q_msb, dtype=np.int64)


def score4_from_int8(q, k) -> int:
    return score4_bruteforce([_msb(a) for a in q], [_msb(b) for b in k])


def score8_bruteforce(q, k) -> int:
    total = 0
    for a, b in zip(q, k):
        total += int(a) * int(b)
    return total


def reference_attention(q, keys, values, scale) -> list:
    """Unpruned softmax(scale * q.K^T) . V in double precision, plain Python."""
    if len(keys) != len(values) or not keys:
        raise ValueError("need a non-empty, equal number of keys and values")
    logits = [scale * score8_bruteforce(q, k) for k in keys]
    top = max(logits)
    e = [math.exp(x - top) for x in logits]
    total = math.fsum(e)
    dim = len(values[0])
    return [math.fsum(e[j] * int(values[j][n]) for j in range(len(values))) / total for n in range(dim)]


def deadzone_classifier(score4: int, theta) -> DeadzoneClass:
    if abs(score4 - theta) < DEADZONE_HALF_WIDTH:
        return DeadzoneClass.DONT_CARE
    return DeadzoneClass.MUST_KEEP if score4 > theta else DeadzoneClass.MUST_PRUNE

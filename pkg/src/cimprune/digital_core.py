"""High-precision digital path: overlap cache, INT8 rescoring, softmax, V sum."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cimprune import kernels
from cimprune.quant import DIM

DEFAULT_SOFTMAX_SCALE = 1.0 / math.sqrt(DIM)


@dataclass(frozen=True)
class OverlapCache:
    """Token ids currently held in the digital core's local register file."""

    resident: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class FetchPlan:
    fetch: frozenset
    reuse_rate: float
    cache: OverlapCache


@dataclass
class AttentionResult:
    tokens: np.ndarray  # unpruned token ids, ascending
    exact_scores: np.ndarray  # int64
    weights: np.ndarray
    output: np.ndarray  # float64 (64,)


def unpruned_ids(u) -> frozenset:
    """Token ids with u_j = 1. ``u`` may be a bool array, an int bitmask or an id set."""
    if isinstance(u, (int, np.integer)):
        return frozenset(j for j in range(int(u).bit_length()) if (int(u) >> j) & 1)
    if isinstance(u, (set, frozenset)):
        return frozenset(int(j) for j in u)
    return frozenset(int(j) for j in np.flatnonzero(np.asarray(u, dtype=bool)))


def mask_to_int(u) -> int:
    return sum(1 << j for j in unpruned_ids(u))


def plan_fetch(cache: OverlapCache, u) -> FetchPlan:
    """Fetch only unpruned tokens that are not already resident."""
    keep = unpruned_ids(u)
    reused = keep & cache.resident
    reuse_rate = len(reused) / len(keep) if keep else 1.0
    return FetchPlan(fetch=keep - cache.resident, reuse_rate=reuse_rate, cache=OverlapCache(keep))


def exact_score(q, k_msb, k_lsb) -> int:
    """Full-precision dot product with the key rebuilt as ``16*msb + lsb``."""
    msb = getattr(k_msb, "msb", k_msb)
    return sum(int(a) * (16 * int(m) + int(l)) for a, m, l in zip(q, msb, k_lsb))


def exact_scores(q, k_msb, k_lsb) -> np.ndarray:
    if len(k_msb) == 0:
        return np.zeros(0, dtype=np.int64)
    return kernels.exact_scores(q, k_msb, k_lsb)


def softmax_weights(scores, scale=DEFAULT_SOFTMAX_SCALE) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("softmax of an empty score list (fully pruned query)")
    if scale <= 0:
        raise ValueError("softmax scale must be positive")
    z = scale * s
    e = np.exp(z - z.max())
    return e / e.sum()


def attend(weights, values) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 2 or len(w) != len(v):
        raise ValueError(f"got {len(w)} weights for {len(v)} value vectors")
    return w @ v

"""Bitline processor: binary-weighted samplers and the pruning comparator.

A BWS is a pair of equal capacitors. Each input is sampled on the freshly
refreshed sampling cap and then shared with the storage cap, so every store
halves the history and adds half the new input. Feeding q bits LSB first
gives each RBL the 1:2:4:8 weighting over q bit positions (Q-BWS); a second
BWS stage over the four RBLs of a token does the same for k bit positions
(K-BWS). Signed nibbles are handled with separate positive and negative rails.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cimprune import kernels


@dataclass(frozen=True)
class BwsState:
    stored: float = 0.0


def bws_step(state: BwsState, v_in: float) -> BwsState:
    """Refresh the sampling cap, sample ``v_in``, share with the storage cap."""
    return BwsState(0.5 * state.stored + 0.5 * v_in)


@dataclass(frozen=True)
class SignedAccumulator:
    pos: float = 0.0
    neg: float = 0.0

    def store(self, v_in: float, sign: int) -> "SignedAccumulator":
        # both rails share on every store so they keep the same binary weighting
        if sign > 0:
            return SignedAccumulator(0.5 * self.pos + 0.5 * v_in, 0.5 * self.neg)
        return SignedAccumulator(0.5 * self.pos, 0.5 * self.neg + 0.5 * v_in)


@dataclass(frozen=True)
class PruneDecision:
    token: int
    keep: bool
    differential: float


def term_sign(b: int, c: int) -> int:
    """Sign of the bit-weight product for q bit ``b`` and k bit ``c``."""
    if not (0 <= b <= 3 and 0 <= c <= 3):
        raise ValueError("bit indices must be in 0..3")
    return -1 if (b == 3) != (c == 3) else 1


def _droop_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        if samples.shape != (4, 4):
            raise ValueError("droop matrix must be 4x4 indexed [q_bit, k_bit]")
        return samples.astype(np.float64)
    droop = np.full((4, 4), np.nan)
    tokens = set()
    for s in samples:
        droop[s.q_bit, s.k_bit] = s.droop
        tokens.add(s.token)
    if len(tokens) > 1:
        raise ValueError("samples span more than one token")
    if np.isnan(droop).any():
        raise ValueError("missing RBL samples; need all 16 (q_bit, k_bit) pairs")
    return droop


def score_token(samples) -> float:
    """Run one token's 16 RBL droops through the signed Q-BWS and K-BWS.

    ``samples`` is either a list of :class:`~cimprune.cim_array.RblSample` or
    a 4x4 array indexed ``[q_bit, k_bit]``. Returns ``pos - neg`` at the
    comparator input.
    """
    droop = _droop_matrix(samples)
    k_pos = BwsState()
    k_neg = BwsState()
    for c in range(4):  # K-BWS samples the LSB row first
        acc = SignedAccumulator()
        for b in range(4):  # q bits arrive LSB first
            acc = acc.store(float(droop[b, c]), term_sign(b, c))
        k_pos = bws_step(k_pos, acc.pos)
        k_neg = bws_step(k_neg, acc.neg)
    return k_pos.stored - k_neg.stored


def score_tokens(droops: np.ndarray) -> np.ndarray:
    """Batched :func:`score_token`; ``droops`` is ``(4, T, 4)`` indexed [b, token, c]."""
    return kernels.bws_differential(droops)


def threshold_voltage(theta: float, v_pre: float, n_active: int) -> float:
    """Comparator reference that puts the decision boundary at score ``theta``."""
    if np.isinf(theta):
        return float(theta)
    return theta * v_pre / (256.0 * n_active)


def compare(differential, v_threshold, noise=None, rng=None, token=0) -> PruneDecision:
    """Keep the token iff the (offset-perturbed) differential beats the threshold.

    Ties prune.
    """
    offset = 0.0
    if noise is not None and noise.sigma_cmp > 0:
        if rng is None:
            raise ValueError("comparator noise requires an rng")
        offset = rng.normal(0.0, noise.sigma_cmp)
    keep = bool(differential + offset > v_threshold)
    return PruneDecision(token=token, keep=keep, differential=float(differential))


def compare_many(differentials, v_threshold, noise=None, rng=None) -> np.ndarray:
    d = np.asarray(differentials, dtype=np.float64)
    if noise is not None and noise.sigma_cmp > 0:
        if rng is None:
            raise ValueError("comparator noise requires an rng")
        d = d + rng.normal(0.0, noise.sigma_cmp, d.shape)
    return d > v_threshold

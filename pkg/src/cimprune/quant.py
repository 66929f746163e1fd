"""INT8 token vectors and their 4-bit MSB/LSB nibble split.

The CIM array only ever sees the signed upper nibble of each element; the
digital core rebuilds the full INT8 value from that nibble plus the raw low
nibble kept in a standard SRAM bank.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIM = 64
TILE_TOKENS = 64
INT8_MIN, INT8_MAX = -128, 127
MSB_MIN, MSB_MAX = -8, 7

# weight of bit b in a signed 4-bit nibble; bit 3 is the sign bit
BIT_WEIGHTS = np.array([1, 2, 4, -8], dtype=np.int64)


def as_token(values) -> np.ndarray:
    """Validate and return a 64-element int8 token vector."""
    arr = np.asarray(values)
    if arr.shape != (DIM,):
        raise ValueError(f"token vector must have shape ({DIM},), got {arr.shape}")
    if arr.size and (arr.min() < INT8_MIN or arr.max() > INT8_MAX):
        raise ValueError("token vector element outside [-128, 127]")
    return arr.astype(np.int8)


def as_tokens(values) -> np.ndarray:
    """Validate a stack of token vectors, shape (T, 64)."""
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.shape[1] != DIM:
        raise ValueError(f"token matrix must have shape (T, {DIM}), got {arr.shape}")
    if arr.size and (arr.min() < INT8_MIN or arr.max() > INT8_MAX):
        raise ValueError("token element outside [-128, 127]")
    return arr.astype(np.int8)


@dataclass(frozen=True, eq=False)
class NibblePlanes:
    """Signed upper nibble and unsigned lower nibble of a token, ``16*msb + lsb == x``."""

    msb: np.ndarray
    lsb: np.ndarray

    def __post_init__(self):
        msb = np.asarray(self.msb)
        lsb = np.asarray(self.lsb)
        if msb.shape != lsb.shape or msb.shape[-1:] != (DIM,):
            raise ValueError("msb/lsb planes must share a (..., 64) shape")
        if msb.size and (msb.min() < MSB_MIN or msb.max() > MSB_MAX):
            raise ValueError("msb nibble outside [-8, 7]")
        if lsb.size and (lsb.min() < 0 or lsb.max() > 15):
            raise ValueError("lsb nibble outside [0, 15]")
        object.__setattr__(self, "msb", msb.astype(np.int8))
        object.__setattr__(self, "lsb", lsb.astype(np.uint8))

    def reconstruct(self) -> np.ndarray:
        return (16 * self.msb.astype(np.int16) + self.lsb).astype(np.int8)

    def __eq__(self, other):
        if not isinstance(other, NibblePlanes):
            return NotImplemented
        return np.array_equal(self.msb, other.msb) and np.array_equal(self.lsb, other.lsb)


def split_nibbles(v) -> NibblePlanes:
    """Split INT8 elements with an arithmetic shift so the low nibble stays unsigned.

    Works on a single token or any stack of tokens with trailing dim 64.
    """
    arr = np.asarray(v)
    if arr.shape[-1:] != (DIM,):
        raise ValueError(f"expected trailing dimension {DIM}, got shape {arr.shape}")
    if arr.size and (arr.min() < INT8_MIN or arr.max() > INT8_MAX):
        raise ValueError("element outside [-128, 127]")
    x = arr.astype(np.int8)
    return NibblePlanes(msb=x >> 4, lsb=(x & 0x0F).astype(np.uint8))


def msb_nibbles(v) -> np.ndarray:
    return np.asarray(v).astype(np.int8) >> 4


def to_bitplane(p) -> np.ndarray:
    """Two's-complement bit decomposition of the MSB nibbles.

    Accepts a :class:`NibblePlanes` or a raw msb array. Returns uint8 bits with
    shape ``(..., 64, 4)``; ``bits[..., n, b]`` is bit ``b`` of element ``n``.
    """
    msb = p.msb if isinstance(p, NibblePlanes) else np.asarray(p).astype(np.int8)
    raw = (msb & 0x0F).astype(np.uint8)
    shifts = np.arange(4, dtype=np.uint8)
    return ((raw[..., None] >> shifts) & 1).astype(np.uint8)


def from_bitplane(bits) -> np.ndarray:
    """Weighted recombination of a bit plane back into signed nibbles."""
    bits = np.asarray(bits).astype(np.int64)
    return (bits @ BIT_WEIGHTS).astype(np.int8)

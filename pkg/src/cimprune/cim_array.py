"""Behavioral model of the transposable 9-T SRAM array.

Key MSB nibbles are stored as bit planes: token ``j`` occupies rows
``4j .. 4j+3`` (one row per k bit position ``c``) and element ``n`` sits in
column ``n``. The CIM path broadcasts one q bit plane per cycle on the read
wordlines; every row then charge-shares its cell capacitors onto its read
bitline (RBL). The standard read path is digital and noiseless.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cimprune import kernels
from cimprune.quant import DIM, TILE_TOKENS, NibblePlanes, from_bitplane, to_bitplane


class DegenerateQueryError(ValueError):
    """Raised when SSCS leaves no column in the charge-sharing network."""


@dataclass(frozen=True)
class NoiseModel:
    sigma_rbl: float = 0.0  # volts, additive per RBL droop sample
    sigma_cmp: float = 0.0  # volts, comparator input-referred offset

    def __post_init__(self):
        if self.sigma_rbl < 0 or self.sigma_cmp < 0:
            raise ValueError("noise sigmas must be non-negative")


@dataclass(frozen=True)
class RblSample:
    token: int
    k_bit: int
    q_bit: int
    droop: float


class CimArray:
    """Key storage plus the precharge / multiply / accumulate CIM cycle.

    Parameters
    ----------
    v_pre : float
        Precharge voltage of every cell capacitor.
    sscs : bool
        Sparsity-aware selective charge sharing: columns whose 4-bit q element
        is zero are disconnected from the sharing network.
    noise : NoiseModel
        Only ``sigma_rbl`` is used here; the comparator lives in the BLP.
    seed : int or numpy SeedSequence
        Seeds the array-owned noise generator.
    """

    def __init__(self, v_pre=1.0, sscs=False, noise=None, seed=0):
        if v_pre <= 0:
            raise ValueError("v_pre must be positive")
        self.v_pre = float(v_pre)
        self.sscs = bool(sscs)
        self.noise = noise if noise is not None else NoiseModel()
        self.rng = np.random.default_rng(seed)
        self._bits = np.zeros((4 * TILE_TOKENS, DIM), dtype=np.uint8)
        # low nibbles live in a separate standard SRAM bank
        self._lsb_bank = np.zeros((TILE_TOKENS, DIM), dtype=np.uint8)
        self._written = np.zeros(TILE_TOKENS, dtype=bool)

    @staticmethod
    def row_of(j, c):
        return 4 * j + c

    @staticmethod
    def _check_id(j):
        if not 0 <= j < TILE_TOKENS:
            raise IndexError(f"token id {j} outside [0, {TILE_TOKENS})")

    @property
    def stored_ids(self) -> np.ndarray:
        return np.flatnonzero(self._written)

    def write_key(self, j: int, k: NibblePlanes) -> None:
        self._check_id(j)
        bits = to_bitplane(k)  # (64, 4)
        self._bits[4 * j : 4 * j + 4, :] = bits.T
        self._lsb_bank[j] = k.lsb
        self._written[j] = True

    def write_keys(self, keys: NibblePlanes) -> None:
        """Write a (T, 64) stack of keys into token slots 0..T-1."""
        n = keys.msb.shape[0]
        if n > TILE_TOKENS:
            raise IndexError(f"at most {TILE_TOKENS} keys fit in one array")
        bits = to_bitplane(keys)  # (T, 64, 4)
        self._bits[: 4 * n] = bits.transpose(0, 2, 1).reshape(4 * n, DIM)
        self._lsb_bank[:n] = keys.lsb
        self._written[:n] = True

    def standard_read(self, j: int) -> NibblePlanes:
        self._check_id(j)
        if not self._written[j]:
            raise KeyError(f"token {j} has not been written")
        msb = from_bitplane(self._bits[4 * j : 4 * j + 4, :].T)
        return NibblePlanes(msb=msb, lsb=self._lsb_bank[j].copy())

    def read_many(self, ids) -> NibblePlanes:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and not self._written[ids].all():
            raise KeyError("read of an unwritten token")
        rows = self._bits.reshape(TILE_TOKENS, 4, DIM)[ids]  # (m, 4, 64)
        msb = from_bitplane(rows.transpose(0, 2, 1))
        return NibblePlanes(msb=msb, lsb=self._lsb_bank[ids].copy())

    def active_columns(self, q_nonzero=None) -> int:
        if not self.sscs:
            return DIM
        if q_nonzero is None:
            raise ValueError("q_nonzero flags are required when SSCS is enabled")
        return int(np.count_nonzero(q_nonzero))

    def cim_cycle(self, q_bits, q_nonzero=None, b=0) -> np.ndarray:
        """One precharge/multiply/accumulate cycle for q bit ``b``.

        Returns RBL droops of shape ``(len(stored_ids), 4)`` indexed
        ``[token, k_bit]``. A cell discharges only when its stored bit and the
        broadcast q bit are both 1, so the popcount of ANDed bits sets the
        discharged fraction of the shared capacitance.
        """
        if not 0 <= b <= 3:
            raise ValueError("q bit index must be in 0..3")
        q_bits = np.asarray(q_bits, dtype=np.uint8)
        if q_bits.shape != (DIM,):
            raise ValueError(f"q_bits must have shape ({DIM},)")
        n_active = self.active_columns(q_nonzero)
        if n_active == 0:
            raise DegenerateQueryError("all-zero query leaves no columns to share")
        if self.sscs:
            # a disconnected column contributes neither charge nor capacitance
            q_bits = q_bits & np.asarray(q_nonzero, dtype=np.uint8)
        ids = self.stored_ids
        kbits = self._bits.reshape(TILE_TOKENS, 4, DIM)[ids]
        popcount = kernels.rbl_popcount(q_bits, kbits)
        droop = self.v_pre * popcount / n_active
        if self.noise.sigma_rbl > 0:
            droop = droop + self.rng.normal(0.0, self.noise.sigma_rbl, droop.shape)
        return droop

    def cim_cycle_samples(self, q_bits, q_nonzero=None, b=0) -> list[RblSample]:
        droop = self.cim_cycle(q_bits, q_nonzero, b)
        return [
            RblSample(token=int(j), k_bit=c, q_bit=b, droop=float(droop[i, c]))
            for i, j in enumerate(self.stored_ids)
            for c in range(4)
        ]

"""Workload generation, the CIMT tensor file format and TOML config loading.

CIMT layout (little-endian)::

    offset  size  field
    0       4     magic b"CIMT"
    4       2     version (u16, currently 1)
    6       2     rows (u16)
    8       2     cols (u16)
    10      1     dtype (u8, 0 = int8)
    11      5     reserved, must be zero
    16      r*c   row-major int8 payload

A workload file is three CIMT records back to back: Q, then K, then V.
"""
from __future__ import annotations

import io
import math
import struct
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from cimprune.digital_core import DEFAULT_SOFTMAX_SCALE
from cimprune.pipeline_energy import CostConfig
from cimprune.quant import DIM, INT8_MAX, INT8_MIN, TILE_TOKENS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MAGIC = b"CIMT"
VERSION = 1
DTYPE_INT8 = 0
_HEADER = struct.Struct("<4sHHHB5s")
assert _HEADER.size == 16


class TensorFormatError(ValueError):
    """Bad magic, version, dtype or reserved bytes."""


class TensorLengthError(TensorFormatError):
    """Payload shorter or longer than the header declares."""


class TensorRangeError(ValueError):
    """Element cannot be represented as int8."""


class ConfigError(ValueError):
    pass


def encode_tensor(tensor) -> bytes:
    arr = np.asarray(tensor)
    if arr.ndim != 2:
        raise ValueError("tensor must be 2-D")
    if arr.size and (arr.min() < INT8_MIN or arr.max() > INT8_MAX):
        raise TensorRangeError("tensor element outside int8 range")
    rows, cols = arr.shape
    if rows > 0xFFFF or cols > 0xFFFF:
        raise ValueError("tensor dimension exceeds u16")
    header = _HEADER.pack(MAGIC, VERSION, rows, cols, DTYPE_INT8, bytes(5))
    return header + arr.astype("<i1").tobytes(order="C")


def read_tensor(stream) -> np.ndarray:
    head = stream.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise TensorLengthError(f"truncated header ({len(head)} of 16 bytes)")
    magic, version, rows, cols, dtype, reserved = _HEADER.unpack(head)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    if dtype != DTYPE_INT8:
        raise TensorFormatError(f"unsupported dtype code {dtype}")
    if reserved != bytes(5):
        raise TensorFormatError("reserved header bytes are not zero")
    n = rows * cols
    payload = stream.read(n)
    if len(payload) != n:
        raise TensorLengthError(f"payload has {len(payload)} bytes, header declares {n}")
    return np.frombuffer(payload, dtype="<i1").reshape(rows, cols).astype(np.int8)


def save_tensor(path, tensor) -> None:
    Path(path).write_bytes(encode_tensor(tensor))


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        arr = read_tensor(fh)
        if fh.read(1):
            raise TensorLengthError("trailing bytes after payload")
    return arr


@dataclass
class Workload:
    Q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    name: str = "workload"
    seed: int | None = None
    sparsity: float | None = None

    def __post_init__(self):
        for label in ("Q", "K", "V"):
            arr = np.asarray(getattr(self, label))
            if arr.ndim != 2 or arr.shape[1] != DIM:
                raise ValueError(f"{label} must have shape (n, {DIM})")
            setattr(self, label, arr.astype(np.int8))
        if len(self.K) != len(self.V):
            raise ValueError("K and V must hold the same number of tokens")

    def tiles(self) -> list["Workload"]:
        """64-token tiles of K/V; every query visits every tile independently."""
        if len(self.K) <= TILE_TOKENS:
            return [self]
        return [
            Workload(self.Q, self.K[s : s + TILE_TOKENS], self.V[s : s + TILE_TOKENS],
                     name=f"{self.name}[{s // TILE_TOKENS}]", seed=self.seed, sparsity=self.sparsity)
            for s in range(0, len(self.K), TILE_TOKENS)
        ]

    def __eq__(self, other):
        if not isinstance(other, Workload):
            return NotImplemented
        return all(np.array_equal(getattr(self, a), getattr(other, a)) for a in ("Q", "K", "V"))


def save_workload(path, wl: Workload) -> None:
    Path(path).write_bytes(encode_tensor(wl.Q) + encode_tensor(wl.K) + encode_tensor(wl.V))


def load_workload(path) -> Workload:
    data = Path(path).read_bytes()
    stream = io.BytesIO(data)
    q, k, v = (read_tensor(stream) for _ in range(3))
    if stream.read(1):
        raise TensorLengthError("trailing bytes after V tensor")
    try:
        return Workload(q, k, v, name=Path(path).stem)
    except ValueError as exc:
        raise TensorFormatError(str(exc)) from exc


def _nonzero_msb_values(rng, size):
    # int8 values whose upper nibble is nonzero: [-128, -1] U [16, 127]
    pool = np.concatenate([np.arange(-128, 0), np.arange(16, 128)])
    return rng.choice(pool, size=size)


def generate_workload(n_tokens=64, n_queries=64, q_sparsity=0.0, distribution="uniform",
                      seed=0, flip_prob=0.1, name=None) -> Workload:
    """Random INT8 workload.

    Every query has exactly ``round(q_sparsity * 64)`` zero elements; its
    other elements have a nonzero upper nibble, so INT8 sparsity and the
    4-bit sparsity seen by the CIM array coincide.

    ``distribution="uniform"`` draws keys and queries independently.
    ``"clustered"`` aligns both with a shared random sign pattern (each
    element flipped with ``flip_prob``), so scores sit well away from zero
    with a random sign per (query, key) pair.
    """
    if not 0.0 <= q_sparsity <= 1.0:
        raise ValueError("q_sparsity must be in [0, 1]")
    if n_tokens < 1 or n_queries < 1:
        raise ValueError("need at least one token and one query")
    if distribution not in ("uniform", "clustered"):
        raise ValueError(f"unknown score distribution {distribution!r}")
    rng = np.random.default_rng(seed)
    n_zero = int(round(q_sparsity * DIM))

    if distribution == "uniform":
        Q = _nonzero_msb_values(rng, (n_queries, DIM))
        K = rng.integers(INT8_MIN, INT8_MAX + 1, size=(n_tokens, DIM))
    else:
        pattern = rng.choice([-1, 1], size=DIM)

        def aligned(n, lo, hi):
            sign = rng.choice([-1, 1], size=(n, 1)) * pattern
            sign = np.where(rng.random((n, DIM)) < flip_prob, -sign, sign)
            mag = rng.integers(lo, hi + 1, size=(n, DIM))
            msb = np.where(sign > 0, np.minimum(mag, 7), -mag)
            return 16 * msb + rng.integers(0, 16, size=(n, DIM))

        Q = aligned(n_queries, 4, 8)
        K = aligned(n_tokens, 4, 8)
    for row in Q:
        row[rng.permutation(DIM)[:n_zero]] = 0
    V = rng.integers(INT8_MIN, INT8_MAX + 1, size=(n_tokens, DIM))
    return Workload(Q, K, V, name=name or f"{distribution}-s{q_sparsity:g}", seed=seed, sparsity=q_sparsity)


def overlap_workload(n_queries=64, keep=16, overlap=13, seed=0, name="overlap") -> Workload:
    """Crafted tile whose unpruned sets are known exactly at threshold 0.

    Key j is one-hot (msb 7 on element j). Query i has msb +7 on its keep-set
    and -8 elsewhere, so score4 is +49 for kept tokens and -56 otherwise.
    Consecutive keep-sets share exactly ``overlap`` tokens.
    """
    if not 0 <= overlap <= keep <= TILE_TOKENS or 2 * keep - overlap > TILE_TOKENS:
        raise ValueError("infeasible keep/overlap combination")
    rng = np.random.default_rng(seed)
    K = np.eye(TILE_TOKENS, DIM, dtype=np.int64) * 112
    current = set(rng.choice(TILE_TOKENS, size=keep, replace=False).tolist())
    Q = np.full((n_queries, DIM), -128, dtype=np.int64)
    for i in range(n_queries):
        Q[i, sorted(current)] = 112
        stay = set(rng.choice(sorted(current), size=overlap, replace=False).tolist())
        outside = sorted(set(range(TILE_TOKENS)) - current)
        fresh = set(rng.choice(outside, size=keep - overlap, replace=False).tolist())
        current = stay | fresh
    V = rng.integers(INT8_MIN, INT8_MAX + 1, size=(TILE_TOKENS, DIM))
    return Workload(Q, K, V, name=name, seed=seed)


@dataclass
class SimConfig:
    threshold: float = 0
    sscs: bool = True
    sigma_rbl: float = 0.0
    sigma_cmp: float = 0.0
    v_pre: float = 1.0
    softmax_scale: float = DEFAULT_SOFTMAX_SCALE
    seed: int = 0
    cost: CostConfig = field(default_factory=CostConfig)

    def __post_init__(self):
        if self.sigma_rbl < 0 or self.sigma_cmp < 0:
            raise ConfigError("noise sigmas must be non-negative")
        if self.v_pre <= 0 or self.softmax_scale <= 0:
            raise ConfigError("v_pre and softmax_scale must be positive")
        if isinstance(self.threshold, float) and math.isnan(self.threshold):
            raise ConfigError("threshold is NaN")

    def as_flat_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "cost"}
        out.update({f.name: getattr(self.cost, f.name) for f in fields(self.cost)})
        return out


_SIM_KEYS = {f.name: f for f in fields(SimConfig) if f.name != "cost"}
_COST_KEYS = {f.name: f for f in fields(CostConfig)}


def _coerce(key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false")
        return value
    if isinstance(default, int) and key != "threshold":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number")
    return value


def config_from_dict(doc: dict) -> SimConfig:
    sim_kw, cost_kw = {}, {}
    defaults = SimConfig()
    for key, value in doc.items():
        if key in _SIM_KEYS:
            sim_kw[key] = _coerce(key, value, getattr(defaults, key))
        elif key in _COST_KEYS:
            cost_kw[key] = _coerce(key, value, getattr(defaults.cost, key))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return SimConfig(cost=CostConfig(**cost_kw), **sim_kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    nested = [k for k, v in doc.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; found tables {nested}")
    return config_from_dict(doc)

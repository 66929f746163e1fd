import math
import struct

import numpy as np
import pytest

from cimprune.pipeline_energy import CostConfig
from cimprune.workload_io import (
    ConfigError,
    SimConfig,
    TensorFormatError,
    TensorLengthError,
    TensorRangeError,
    Workload,
    encode_tensor,
    generate_workload,
    load_config,
    load_tensor,
    load_workload,
    overlap_workload,
    save_tensor,
    save_workload,
)

from conftest import CONFIGS


def test_header_layout():
    raw = encode_tensor(np.array([[1, -2, 3]], dtype=np.int8))
    assert raw[:4] == b"CIMT"
    assert struct.unpack("<HHHB", raw[4:11]) == (1, 1, 3, 0)
    assert raw[11:16] == bytes(5)
    assert raw[16:] == bytes([1, 0xFE, 3])


def test_tensor_round_trip(tmp_path, rng):
    t = rng.integers(-128, 128, (7, 64)).astype(np.int8)
    p = tmp_path / "t.cimt"
    save_tensor(p, t)
    assert np.array_equal(load_tensor(p), t)
    data = p.read_bytes()
    save_tensor(p, load_tensor(p))
    assert p.read_bytes() == data


def test_workload_round_trip(tmp_path):
    wl = generate_workload(40, 10, 0.3, "clustered", seed=5)
    p = tmp_path / "w.cimt"
    save_workload(p, wl)
    first = p.read_bytes()
    back = load_workload(p)
    assert back == wl
    save_workload(p, back)
    assert p.read_bytes() == first


def test_truncated(tmp_path):
    p = tmp_path / "w.cimt"
    save_workload(p, generate_workload(8, 2, 0.0, seed=1))
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(TensorLengthError):
        load_workload(p)
    p.write_bytes(b"CIMT\x01")
    with pytest.raises(TensorLengthError):
        load_tensor(p)


def test_bad_magic(tmp_path):
    p = tmp_path / "t.cimt"
    p.write_bytes(b"XIMT" + encode_tensor(np.zeros((1, 1)))[4:])
    with pytest.raises(TensorFormatError, match="magic"):
        load_tensor(p)


@pytest.mark.parametrize("offset, value", [(4, 2), (10, 1), (12, 9)])
def test_bad_header_fields(tmp_path, offset, value):
    raw = bytearray(encode_tensor(np.zeros((1, 2))))
    raw[offset] = value
    p = tmp_path / "t.cimt"
    p.write_bytes(bytes(raw))
    with pytest.raises(TensorFormatError):
        load_tensor(p)


def test_out_of_range():
    with pytest.raises(TensorRangeError):
        encode_tensor(np.array([[128]]))
    with pytest.raises(TensorRangeError):
        encode_tensor(np.array([[-129]]))


def test_trailing_bytes(tmp_path):
    p = tmp_path / "t.cimt"
    p.write_bytes(encode_tensor(np.zeros((1, 1))) + b"\x00")
    with pytest.raises(TensorLengthError):
        load_tensor(p)


@pytest.mark.parametrize("s", [0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 0.33])
def test_generator_sparsity(s):
    wl = generate_workload(64, 32, s, "uniform", seed=2)
    realized = float((wl.Q == 0).mean())
    assert abs(realized - s) <= 0.02
    nz = wl.Q[wl.Q != 0]
    assert np.all((nz >> 4) != 0)


def test_generator_edges_and_determinism():
    assert not generate_workload(64, 4, 1.0, seed=0).Q.any()
    assert (generate_workload(64, 4, 0.0, seed=0).Q != 0).all()
    assert generate_workload(64, 4, 0.5, "clustered", seed=9) == generate_workload(64, 4, 0.5, "clustered", seed=9)
    assert generate_workload(64, 4, 0.5, seed=9) != generate_workload(64, 4, 0.5, seed=10)
    with pytest.raises(ValueError):
        generate_workload(64, 4, 1.5)
    with pytest.raises(ValueError):
        generate_workload(64, 4, 0.5, "gaussian")


def test_clustered_scores_spread():
    wl = generate_workload(64, 16, 0.75, "clustered", seed=4)
    s4 = (wl.Q >> 4).astype(int) @ (wl.K >> 4).astype(int).T
    assert (np.abs(s4) >= 256).mean() > 0.6


def test_overlap_workload_design():
    wl = overlap_workload(10, keep=20, overlap=16, seed=3)
    s4 = (wl.Q >> 4).astype(int) @ (wl.K >> 4).astype(int).T
    assert set(np.unique(s4)) == {49, -56}
    sets = [set(np.flatnonzero(row > 0)) for row in s4]
    assert all(len(s) == 20 for s in sets)
    assert all(len(a & b) == 16 for a, b in zip(sets, sets[1:]))
    with pytest.raises(ValueError):
        overlap_workload(4, keep=40, overlap=10)


def test_tiles():
    wl = generate_workload(150, 3, 0.0, seed=0)
    tiles = wl.tiles()
    assert [len(t.K) for t in tiles] == [64, 64, 22]
    assert np.array_equal(np.concatenate([t.V for t in tiles]), wl.V)


def test_workload_validation():
    with pytest.raises(ValueError):
        Workload(np.zeros((1, 64)), np.zeros((2, 64)), np.zeros((3, 64)))
    with pytest.raises(ValueError):
        Workload(np.zeros((1, 63)), np.zeros((2, 64)), np.zeros((2, 64)))


def test_config_files():
    assert load_config(CONFIGS / "default.toml") == SimConfig()
    cal = load_config(CONFIGS / "calibration.toml")
    assert cal.cost.e_sram_row_read == 341.0


def test_config_errors(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("thresold = 3\n")
    with pytest.raises(ConfigError, match="unknown"):
        load_config(p)
    p.write_text("sscs = 1\n")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("[cost]\ne_mac = 1.0\n")
    with pytest.raises(ConfigError, match="flat"):
        load_config(p)
    p.write_text("e_mac = -1.0\n")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("threshold = = 2\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_config_inf_threshold(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("threshold = -inf\nmac_lane_count = 32\n")
    cfg = load_config(p)
    assert math.isinf(cfg.threshold) and cfg.threshold < 0
    assert cfg.cost == CostConfig(mac_lane_count=32)

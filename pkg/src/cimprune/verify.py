"""Oracle-equivalence suites shared by ``cimprune verify`` and the test suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cimprune import blp, digital_core
from cimprune.cim_array import CimArray
from cimprune.oracle import reference_attention, score4_bruteforce, score8_bruteforce
from cimprune.quant import DIM, TILE_TOKENS, split_nibbles, to_bitplane
from cimprune.sim import simulate
from cimprune.workload_io import SimConfig, Workload


@dataclass
class SuiteResult:
    name: str
    checked: int
    failures: int
    worst: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failures == 0


def analog_differentials(q_msb, k_msb, sscs, v_pre=1.0):
    """Noiseless CIM + BLP differentials of one query nibble vector against (T, 64) keys.

    Returns ``(differentials, n_active)``; ``n_active`` is 0 for a degenerate query.
    """
    arr = CimArray(v_pre=v_pre, sscs=sscs)
    k_msb = np.asarray(k_msb, dtype=np.int8)
    arr.write_keys(split_nibbles(16 * k_msb.astype(np.int16)))
    q_nonzero = (np.asarray(q_msb) != 0).astype(np.uint8)
    n_active = arr.active_columns(q_nonzero)
    if n_active == 0:
        return np.zeros(len(k_msb)), 0
    qbits = to_bitplane(q_msb)
    droops = np.stack([arr.cim_cycle(qbits[:, b], q_nonzero, b) for b in range(4)])
    return blp.score_tokens(droops), n_active


def weighting_identity(trials, seed, inject_fault=False, tol=1e-9) -> SuiteResult:
    """256 * N_active * differential / v_pre against the brute-force nibble dot product."""
    rng = np.random.default_rng(seed)
    checked = failures = 0
    worst = 0.0
    while checked < trials:
        n = min(TILE_TOKENS, trials - checked)
        sparsity = rng.random()
        q = rng.integers(-8, 8, size=DIM)
        q[rng.random(DIM) < sparsity] = 0
        k = rng.integers(-8, 8, size=(n, DIM))
        sscs = bool(rng.integers(2))
        v_pre = float(rng.uniform(0.5, 1.5))
        diff, n_active = analog_differentials(q, k, sscs, v_pre)
        for j in range(n):
            expect = score4_bruteforce(q, k[j])
            got = 256.0 * n_active * diff[j] / v_pre if n_active else 0.0
            if inject_fault and checked == 0:
                got += 1.0
            err = abs(got - expect)
            worst = max(worst, err)
            failures += err > tol
            checked += 1
    return SuiteResult("blp_vs_score4", checked, failures, worst)


def nibble_reconstruction(trials, seed) -> SuiteResult:
    rng = np.random.default_rng(seed)
    checked = failures = 0
    while checked < trials:
        n = min(1024, trials - checked)
        q = rng.integers(-128, 128, size=DIM).astype(np.int8)
        k = rng.integers(-128, 128, size=(n, DIM)).astype(np.int8)
        planes = split_nibbles(k)
        got = digital_core.exact_scores(q, planes.msb, planes.lsb)
        expect = np.array([score8_bruteforce(q, row) for row in k])
        failures += int((got != expect).sum())
        checked += n
    return SuiteResult("nibble_reconstruction", checked, failures)


def no_pruning_equivalence(trials, seed, n_tokens=8, n_queries=4, tol=1e-9) -> SuiteResult:
    """Full pipeline at threshold -inf against unpruned reference attention."""
    rng = np.random.default_rng(seed)
    cfg = SimConfig(threshold=float("-inf"), sscs=False)
    failures = 0
    worst = 0.0
    for _ in range(trials):
        Q = rng.integers(-128, 128, size=(n_queries, DIM))
        K = rng.integers(-128, 128, size=(n_tokens, DIM))
        V = rng.integers(-128, 128, size=(n_tokens, DIM))
        res = simulate(Workload(Q, K, V), cfg)
        for i in range(n_queries):
            ref = np.array(reference_attention(Q[i].tolist(), K.tolist(), V.tolist(), cfg.softmax_scale))
            err = float(np.max(np.abs(res.outputs[0, i] - ref)))
            worst = max(worst, err)
            failures += err > tol
    return SuiteResult("no_pruning_vs_reference", trials, failures, worst)


def run_all(trials, seed, inject_fault=False) -> list[SuiteResult]:
    ss = np.random.SeedSequence(seed)
    s_a, s_b, s_c = (int(s.generate_state(1)[0]) for s in ss.spawn(3))
    return [
        weighting_identity(trials, s_a, inject_fault=inject_fault),
        nibble_reconstruction(trials, s_b),
        no_pruning_equivalence(max(1, trials // 100) if trials else 0, s_c),
    ]

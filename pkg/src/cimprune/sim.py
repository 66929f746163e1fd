"""End-to-end simulation of one workload through the hybrid accelerator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cimprune import blp, digital_core
from cimprune.cim_array import CimArray, NoiseModel
from cimprune.oracle import DEADZONE_HALF_WIDTH, score4_many
from cimprune.pipeline_energy import (
    QueryEvents,
    SimReport,
    account_energy,
    compare_baselines,
    schedule,
    stage_costs,
)
from cimprune.quant import DIM, split_nibbles, to_bitplane
from cimprune.workload_io import SimConfig, Workload

# fixed sub-stream indices derived from the single run seed
STREAM_RBL = 0
STREAM_CMP = 1


def substream(seed: int, index: int, tile: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(index, tile))


@dataclass
class QueryTrace:
    keep: np.ndarray  # bool (T,)
    score4: np.ndarray  # int64 (T,), oracle scores for error accounting
    differential: np.ndarray
    result: digital_core.AttentionResult
    reuse_rate: float
    events: QueryEvents
    degenerate: bool = False


@dataclass
class SimResult:
    report: SimReport
    outputs: np.ndarray  # (n_tiles, n_queries, 64)
    traces: list = field(default_factory=list)  # per tile, list of QueryTrace


class TileSimulator:
    """One CIM array instance plus the digital core serving it."""

    def __init__(self, K, V, cfg: SimConfig, tile: int = 0):
        self.cfg = cfg
        self.noise = NoiseModel(cfg.sigma_rbl, cfg.sigma_cmp)
        self.array = CimArray(v_pre=cfg.v_pre, sscs=cfg.sscs, noise=self.noise,
                              seed=substream(cfg.seed, STREAM_RBL, tile))
        self.cmp_rng = np.random.default_rng(substream(cfg.seed, STREAM_CMP, tile))
        self.keys = split_nibbles(K)
        self.array.write_keys(self.keys)
        self.V = np.asarray(V)
        self.n_tokens = len(K)
        self.cache = digital_core.OverlapCache()
        # local register file: token id -> (msb, lsb)
        self.registers: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def analog_scores(self, q_msb):
        """Run the four q bit cycles and the BLP; returns (differential, n_active)."""
        q_nonzero = (q_msb != 0).astype(np.uint8)
        n_active = self.array.active_columns(q_nonzero)
        if n_active == 0:
            return None, 0
        qbits = to_bitplane(q_msb)  # (64, 4)
        droops = np.stack([self.array.cim_cycle(qbits[:, b], q_nonzero, b) for b in range(4)])
        return blp.score_tokens(droops), n_active

    def run_query(self, q) -> QueryTrace:
        cfg = self.cfg
        q = np.asarray(q, dtype=np.int8)
        q_msb = q >> 4
        differential, n_active = self.analog_scores(q_msb)
        degenerate = differential is None
        if degenerate:
            # nothing to charge-share: every token pruned by convention
            differential = np.zeros(self.n_tokens)
            keep = np.zeros(self.n_tokens, dtype=bool)
        else:
            v_th = blp.threshold_voltage(cfg.threshold, cfg.v_pre, n_active)
            keep = blp.compare_many(differential, v_th, self.noise, self.cmp_rng)

        plan = digital_core.plan_fetch(self.cache, keep)
        self.cache = plan.cache
        for j in sorted(plan.fetch):
            k = self.array.standard_read(j)
            self.registers[j] = (k.msb, k.lsb)
        for j in list(self.registers):
            if j not in plan.cache.resident:
                del self.registers[j]

        ids = np.flatnonzero(keep)
        if ids.size:
            k_msb = np.stack([self.registers[j][0] for j in ids])
            k_lsb = np.stack([self.registers[j][1] for j in ids])
            scores = digital_core.exact_scores(q, k_msb, k_lsb)
            weights = digital_core.softmax_weights(scores, cfg.softmax_scale)
            output = digital_core.attend(weights, self.V[ids])
        else:
            scores = np.zeros(0, dtype=np.int64)
            weights = np.zeros(0)
            output = np.zeros(DIM)

        events = QueryEvents(
            tokens=self.n_tokens,
            unpruned=int(ids.size),
            fetched=len(plan.fetch),
            cim_cycles=0 if degenerate else 4,
            kbws_cycles=0 if degenerate else 4,
            compares=0 if degenerate else self.n_tokens,
            buffer_accesses=1 + int(ids.size),
        )
        return QueryTrace(
            keep=keep,
            score4=score4_many(q_msb, self.keys.msb),
            differential=differential,
            result=digital_core.AttentionResult(ids, scores, weights, output),
            reuse_rate=plan.reuse_rate,
            events=events,
            degenerate=degenerate,
        )


def simulate(wl: Workload, cfg: SimConfig, keep_traces: bool = False) -> SimResult:
    tiles = wl.tiles()
    events: list[QueryEvents] = []
    costs = []
    outputs = np.zeros((len(tiles), len(wl.Q), DIM))
    traces_all = []
    n_dec = n_pruned = 0
    n_out = n_in = err_out = flip_in = 0
    degenerate = 0
    any_kept = np.zeros(len(wl.Q), dtype=bool)
    reuse = []
    theta = cfg.threshold

    for t, tile in enumerate(tiles):
        sim = TileSimulator(tile.K, tile.V, cfg, tile=t)
        traces = []
        for i, q in enumerate(wl.Q):
            tr = sim.run_query(q)
            outputs[t, i] = tr.result.output
            events.append(tr.events)
            costs.append(stage_costs(tr.events, cfg.cost))
            reuse.append(tr.reuse_rate)
            n_dec += tr.keep.size
            n_pruned += int((~tr.keep).sum())
            any_kept[i] |= bool(tr.keep.any())
            degenerate += int(tr.degenerate)
            if math.isinf(theta):
                inside = np.zeros(tr.keep.size, dtype=bool)
            else:
                inside = np.abs(tr.score4 - theta) < DEADZONE_HALF_WIDTH
            ideal = tr.score4 > theta
            wrong = tr.keep != ideal
            n_in += int(inside.sum())
            n_out += int((~inside).sum())
            flip_in += int((wrong & inside).sum())
            err_out += int((wrong & ~inside).sum())
            if keep_traces:
                traces.append(tr)
        traces_all.append(traces)

    sched = schedule(costs)
    energy = account_energy(events, cfg.cost)
    report = SimReport(
        total_cycles=sched.total_cycles,
        serial_cycles=sched.serial_cycles,
        energy=energy,
        cim_fraction=energy.cim / energy.total if energy.total else 0.0,
        n_queries=len(wl.Q),
        n_decisions=n_dec,
        pruning_rate=n_pruned / n_dec if n_dec else 0.0,
        reuse_rate=float(np.mean(reuse)) if reuse else 0.0,
        decisions_outside_deadzone=n_out,
        decisions_inside_deadzone=n_in,
        decision_errors_outside_deadzone=err_out,
        decision_flips_inside_deadzone=flip_in,
        fully_pruned_query_count=int((~any_kept).sum()),
        degenerate_query_count=degenerate,
    )
    if energy.total > 0:
        report.savings_vs_digital_nopruning, report.savings_vs_digital_pruning = compare_baselines(
            events, cfg.cost, energy)
    return SimResult(report=report, outputs=outputs, traces=traces_all)

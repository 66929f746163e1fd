"""Two-stage pipeline schedule and event-based energy accounting.

Stage A is CIM scoring of a query (q bit cycles, K-BWS, compare). Stage B is
fetching the missing unpruned keys and the digital QK / softmax / SV work.
Stage A of query i+1 runs while stage B of query i is busy.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

from cimprune.quant import DIM


@dataclass(frozen=True)
class CostConfig:
    # cycles
    cim_bit_cycle: int = 1
    kbws_cycle: int = 1
    compare_cycle: int = 1
    sram_read_row: int = 1
    rows_per_token: int = 4
    mac_lane_count: int = 64
    softmax_cycles_per_token: int = 1
    # energies, abstract calibrated units
    e_cim_cycle: float = 1.0
    e_compare: float = 0.05
    e_sram_row_read: float = 1.0
    e_mac: float = 0.01
    e_softmax_token: float = 0.2
    e_buffer_access: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if self.mac_lane_count < 1:
            raise ValueError("mac_lane_count must be at least 1")


@dataclass
class QueryEvents:
    """Event counts for one query against one tile."""

    tokens: int = 0  # token decisions made by the comparators
    unpruned: int = 0
    fetched: int = 0
    cim_cycles: int = 4
    kbws_cycles: int = 4
    compares: int = 0
    buffer_accesses: int = 0

    @property
    def macs(self) -> int:
        # QK^T rescoring plus the weighted V sum
        return 2 * DIM * self.unpruned


@dataclass
class EnergyBreakdown:
    cim: float = 0.0
    fetch: float = 0.0
    digital_mac: float = 0.0
    softmax: float = 0.0
    buffers: float = 0.0

    @property
    def total(self) -> float:
        return self.cim + self.fetch + self.digital_mac + self.softmax + self.buffers

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Schedule:
    total_cycles: int
    # per query: (a_start, a_end, b_start, b_end)
    timeline: list = field(default_factory=list)

    @property
    def serial_cycles(self) -> int:
        return sum((a1 - a0) + (b1 - b0) for a0, a1, b0, b1 in self.timeline)


def stage_costs(ev: QueryEvents, cfg: CostConfig) -> tuple[int, int]:
    a = ev.cim_cycles * cfg.cim_bit_cycle + ev.kbws_cycles * cfg.kbws_cycle + cfg.compare_cycle
    mac_cycles = math.ceil(DIM * ev.unpruned / cfg.mac_lane_count)
    b = (
        ev.fetched * cfg.rows_per_token * cfg.sram_read_row
        + 2 * mac_cycles
        + ev.unpruned * cfg.softmax_cycles_per_token
    )
    return a, b


def schedule(costs) -> Schedule:
    """Pipeline ``[(A_i, B_i), ...]``: A back to back, B_i after A_i and B_{i-1}."""
    a_end = 0
    b_end = 0
    timeline = []
    for a, b in costs:
        a0, a1 = a_end, a_end + a
        b0 = max(a1, b_end)
        b1 = b0 + b
        timeline.append((a0, a1, b0, b1))
        a_end, b_end = a1, b1
    return Schedule(total_cycles=b_end if timeline else 0, timeline=timeline)


def account_energy(events, cfg: CostConfig) -> EnergyBreakdown:
    e = EnergyBreakdown()
    for ev in events:
        e.cim += ev.cim_cycles * cfg.e_cim_cycle + ev.compares * cfg.e_compare
        e.fetch += ev.fetched * cfg.rows_per_token * cfg.e_sram_row_read
        e.digital_mac += ev.macs * cfg.e_mac
        e.softmax += ev.unpruned * cfg.e_softmax_token
        e.buffers += ev.buffer_accesses * cfg.e_buffer_access
    return e


def baseline_energy(events, cfg: CostConfig, pruning: bool) -> float:
    """8-bit fully digital reference on the same workload.

    Both baselines fetch and score every token of every query. Without
    pruning they also run softmax and the V sum on all tokens; with pruning
    only on the tokens the hybrid kept.
    """
    total = 0.0
    for ev in events:
        tail = ev.unpruned if pruning else ev.tokens
        total += ev.tokens * cfg.rows_per_token * cfg.e_sram_row_read
        total += DIM * (ev.tokens + tail) * cfg.e_mac
        total += tail * cfg.e_softmax_token
        total += (1 + tail) * cfg.e_buffer_access
    return total


def compare_baselines(events, cfg: CostConfig, hybrid: EnergyBreakdown | None = None) -> tuple[float, float]:
    """Savings ratios ``(vs digital without pruning, vs digital with pruning)``."""
    hybrid = hybrid if hybrid is not None else account_energy(events, cfg)
    if hybrid.total <= 0:
        raise ZeroDivisionError("hybrid energy is zero; check the cost configuration")
    return (
        baseline_energy(events, cfg, pruning=False) / hybrid.total,
        baseline_energy(events, cfg, pruning=True) / hybrid.total,
    )


@dataclass
class SimReport:
    total_cycles: int = 0
    serial_cycles: int = 0
    energy: EnergyBreakdown = field(default_factory=EnergyBreakdown)
    cim_fraction: float = 0.0
    n_queries: int = 0
    n_decisions: int = 0
    pruning_rate: float = 0.0
    reuse_rate: float = 0.0
    decisions_outside_deadzone: int = 0
    decisions_inside_deadzone: int = 0
    decision_errors_outside_deadzone: int = 0
    decision_flips_inside_deadzone: int = 0
    fully_pruned_query_count: int = 0
    degenerate_query_count: int = 0
    savings_vs_digital_nopruning: float = 0.0
    savings_vs_digital_pruning: float = 0.0

    @property
    def error_rate_outside_deadzone(self) -> float:
        n = self.decisions_outside_deadzone
        return self.decision_errors_outside_deadzone / n if n else 0.0

    @property
    def flip_rate_inside_deadzone(self) -> float:
        n = self.decisions_inside_deadzone
        return self.decision_flips_inside_deadzone / n if n else 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["energy"]["total"] = self.energy.total
        d["error_rate_outside_deadzone"] = self.error_rate_outside_deadzone
        d["flip_rate_inside_deadzone"] = self.flip_rate_inside_deadzone
        return d

"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Times each hot kernel on tile-sized inputs, then a full simulation with each
backend patched in.
"""
import argparse
import time

import numpy as np

from cimprune import kernels
from cimprune.sim import simulate
from cimprune.workload_io import SimConfig, generate_workload


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--queries", type=int, default=256)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    qbits = rng.integers(0, 2, 64).astype(np.uint8)
    kbits = rng.integers(0, 2, (64, 4, 64)).astype(np.uint8)
    droop = rng.random((4, 64, 4))
    q = rng.integers(-128, 128, 64).astype(np.int8)
    k = rng.integers(-128, 128, (64, 64)).astype(np.int8)
    k_msb, k_lsb = k >> 4, (k & 15).astype(np.uint8)
    inner = 200

    cases = {
        "rbl_popcount": lambda m: [m.rbl_popcount(qbits, kbits) for _ in range(inner)],
        "bws_differential": lambda m: [m.bws_differential(droop) for _ in range(inner)],
        "exact_scores": lambda m: [m.exact_scores(q, k_msb, k_lsb) for _ in range(inner)],
    }
    backs = kernels.backends()
    print(f"default backend: {kernels.BACKEND}")
    print(f"{'kernel':<18}" + "".join(f"{name:>14}" for name in backs) + "   (us per call)")
    for label, fn in cases.items():
        times = [best_of(lambda m=m: fn(m), args.repeat) / inner * 1e6 for m in backs.values()]
        print(f"{label:<18}" + "".join(f"{t:>14.2f}" for t in times))

    wl = generate_workload(64, args.queries, 0.5, "clustered", seed=1)
    cfg = SimConfig(sigma_rbl=0.02)
    saved = {n: getattr(kernels, n) for n in cases}
    print(f"\nsimulate({args.queries} queries x 64 tokens):")
    for name, mod in backs.items():
        for n in cases:
            setattr(kernels, n, getattr(mod, n))
        t = best_of(lambda: simulate(wl, cfg), max(1, args.repeat // 2))
        print(f"  {name:<10} {t * 1e3:8.1f} ms")
    for n, f in saved.items():
        setattr(kernels, n, f)


if __name__ == "__main__":
    main()

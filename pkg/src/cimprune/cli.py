"""Command-line entry point: ``cimprune {run,sweep,verify,generate}``.

Exit codes: 0 success, 1 verification failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from cimprune import verify
from cimprune.sim import simulate
from cimprune.workload_io import (
    ConfigError,
    SimConfig,
    TensorFormatError,
    TensorRangeError,
    generate_workload,
    load_config,
    load_workload,
    save_workload,
)

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2

SWEEP_AXES = ("threshold", "sigma_rbl", "q-sparsity")
SWEEP_HEADER = [
    "axis",
    "value",
    "sscs",
    "trials",
    "pruning_rate",
    "error_rate_outside_deadzone",
    "flip_rate_inside_deadzone",
    "errors_outside_deadzone",
    "decisions_outside_deadzone",
    "energy_total",
    "total_cycles",
]

# sub-stream index for per-trial seeds in sweeps
_STREAM_SWEEP = 2


class UsageError(Exception):
    pass


def _json_number(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _config(args) -> SimConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else SimConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "sscs", None) is not None:
        overrides["sscs"] = args.sscs == "on"
    if getattr(args, "threshold", None) is not None:
        overrides["threshold"] = args.threshold
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def report_document(result, cfg: SimConfig, workload_name: str) -> dict:
    doc = result.report.as_dict()
    doc["workload"] = workload_name
    doc["config"] = {k: _json_number(v) for k, v in cfg.as_flat_dict().items()}
    doc["generated_at"] = datetime.now(timezone.utc).isoformat()
    return doc


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = _config(args)
    wl = load_workload(args.workload)
    result = simulate(wl, cfg)
    doc = report_document(result, cfg, wl.name)
    if args.format == "csv":
        flat = {k: v for k, v in doc.items() if not isinstance(v, dict)}
        flat.update({f"energy_{k}": v for k, v in doc["energy"].items()})
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(flat), lineterminator="\n")
        writer.writeheader()
        writer.writerow(flat)
        _emit(buf.getvalue(), args.out)
    else:
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def trial_seed(seed: int, trial: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_STREAM_SWEEP, trial))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def sweep_point(axis, value, base_cfg: SimConfig, trials, workload, gen) -> dict:
    """Pool ``trials`` independent runs at one sweep point."""
    errs = outside = flips = inside = pruned = decisions = 0
    energy = cycles = 0.0
    for t in range(trials):
        seed = trial_seed(base_cfg.seed, t)
        cfg = dataclasses.replace(base_cfg, seed=seed)
        if axis == "threshold":
            cfg = dataclasses.replace(cfg, threshold=value)
        elif axis == "sigma_rbl":
            cfg = dataclasses.replace(cfg, sigma_rbl=value)
        wl = workload
        if wl is None or axis == "q-sparsity":
            sparsity = value if axis == "q-sparsity" else gen["sparsity"]
            wl = generate_workload(gen["tokens"], gen["queries"], sparsity, gen["distribution"], seed=seed)
        r = simulate(wl, cfg).report
        errs += r.decision_errors_outside_deadzone
        outside += r.decisions_outside_deadzone
        flips += r.decision_flips_inside_deadzone
        inside += r.decisions_inside_deadzone
        pruned += round(r.pruning_rate * r.n_decisions)
        decisions += r.n_decisions
        energy += r.energy.total
        cycles += r.total_cycles
    n = max(trials, 1)
    return {
        "axis": axis,
        "value": value,
        "sscs": "on" if base_cfg.sscs else "off",
        "trials": trials,
        "pruning_rate": pruned / decisions if decisions else 0.0,
        "error_rate_outside_deadzone": errs / outside if outside else 0.0,
        "flip_rate_inside_deadzone": flips / inside if inside else 0.0,
        "errors_outside_deadzone": errs,
        "decisions_outside_deadzone": outside,
        "energy_total": energy / n,
        "total_cycles": cycles / n,
    }


def _sweep_point_star(job):
    return sweep_point(*job)


def cmd_sweep(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise UsageError(f"invalid axis {args.axis!r}; choose from {', '.join(SWEEP_AXES)}")
    if args.num < 0 or args.trials < 1:
        raise UsageError("--num must be >= 0 and --trials >= 1")
    cfg = _config(args)
    workload = load_workload(args.workload) if args.workload else None
    gen = {"tokens": args.tokens, "queries": args.queries,
           "sparsity": args.sparsity, "distribution": args.distribution}
    values = sorted(np.linspace(args.start, args.stop, args.num).tolist()) if args.num else []
    if args.axis == "threshold":
        values = [int(round(v)) for v in values]
    jobs = [(args.axis, v, cfg, args.trials, workload, gen) for v in values]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point_star, jobs))  # map keeps input order
    else:
        rows = [_sweep_point_star(j) for j in jobs]

    if args.format == "json":
        _emit(json.dumps(rows, indent=2) + "\n", args.out)
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials == 0:
        print("warning: trials=0, nothing checked (vacuous pass)", file=sys.stderr)
    results = verify.run_all(args.trials, args.seed, inject_fault=args.inject_fault)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: checked={r.checked} failures={r.failures} worst={r.worst:.3g}")
    ok = all(r.passed for r in results)
    print("all suites passed" if ok else "verification FAILED")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_generate(args) -> int:
    wl = generate_workload(args.tokens, args.queries, args.sparsity, args.distribution, seed=args.seed)
    save_workload(args.out, wl)
    print(f"wrote {args.out}: Q={wl.Q.shape} K={wl.K.shape} V={wl.V.shape}", file=sys.stderr)
    return EXIT_OK


def _threshold(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise argparse.ArgumentTypeError("threshold is NaN")
    return int(v) if v.is_integer() else v


def _common(p, need_workload=False):
    p.add_argument("--workload", required=need_workload, help="CIMT workload file (Q, K, V)")
    p.add_argument("--config", help="flat TOML config file")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--sscs", choices=["on", "off"], help="overrides the config SSCS flag")
    p.add_argument("--threshold", type=_threshold, help="score threshold, overrides config")


def _gen_args(p):
    p.add_argument("--tokens", type=int, default=64)
    p.add_argument("--queries", type=int, default=64)
    p.add_argument("--sparsity", type=float, default=0.5, help="q element sparsity")
    p.add_argument("--distribution", choices=["uniform", "clustered"], default="clustered")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cimprune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a workload and print the report")
    _common(p, need_workload=True)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one parameter and emit a table")
    _common(p)
    _gen_args(p)
    p.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, default=1.0)
    p.add_argument("--num", type=int, default=5, help="number of points (0 gives header only)")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=["json", "csv"], default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the oracle-equivalence suites")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("generate", help="write a random workload file")
    _gen_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, TensorFormatError, TensorRangeError, ConfigError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: run, validate, inspect, sweep.

Exit codes: 0 success, 2 parse/validation error, 3 invariant violation in
strict mode, 4 unschedulable single-robot goals.
"""

from __future__ import annotations

import argparse
import os
import resource
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from .agents import InvariantViolation
from .config import ParseError, parse_config, validate_config
from .engine import (
    ROBOTS_MODE,
    SETTLERS_MODE,
    SINGLE_ROBOT_MODE,
    Unschedulable,
    run_simulation,
)
from .metrics import fit_wealth_tail, write_artifacts, write_summary

MODE_FLAGS = {
    "settlers": SETTLERS_MODE,
    "robots": ROBOTS_MODE,
    "single-robot": SINGLE_ROBOT_MODE,
}


def _load_model(path: str, args):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    model = parse_config(text)
    if getattr(args, "years", None) is not None:
        model.control.n_years = args.years
    if getattr(args, "individuals", None) is not None:
        model.control.n_individuals = args.individuals
    return model


def _peak_rss_mb() -> float:
    # ru_maxrss is kilobytes on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _run_one(path, seed, mode, out_dir, strict, years, individuals, track,
             quiet=False):
    ns = argparse.Namespace(years=years, individuals=individuals)
    model = _load_model(path, ns)
    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, "_DeployersOutput.txt")
    started = time.perf_counter()
    with open(log_path, "w", encoding="utf-8") as sink:
        artifacts = run_simulation(
            model, seed=seed, mode=mode, out_sink=sink, strict=strict,
            track=track,
        )
    wall = time.perf_counter() - started
    write_artifacts(artifacts.store, out_dir)
    totals = [snap.total for snap in artifacts.store.wealth]
    fit = fit_wealth_tail(totals) if totals else {"slope": 0, "r2": 0, "flat": True}
    summary = {
        "mode": artifacts.mode,
        "seed": artifacts.seed,
        "months_run": artifacts.months_run,
        "individuals": model.control.n_individuals,
        "state_wishes_done_month": artifacts.state_wishes_done_month,
        "refused_price": artifacts.refusals.get("price_too_high", 0),
        "refused_stock": artifacts.refusals.get("out_of_stock", 0),
        "refused_funds": artifacts.refusals.get("insufficient_funds", 0),
        "wealth_tail_slope": f"{fit['slope']:.4f}",
        "wealth_tail_r2": f"{fit['r2']:.4f}",
        "wealth_tail_flat": int(fit["flat"]),
        "violations": len(artifacts.violations),
        "wall_seconds": f"{wall:.2f}",
        "peak_rss_mb": f"{_peak_rss_mb():.1f}",
    }
    write_summary(os.path.join(out_dir, "summary.txt"), summary)
    if not quiet:
        print(
            f"run complete: months={artifacts.months_run} wall={wall:.1f}s "
            f"peak_rss={_peak_rss_mb():.0f}MB out={out_dir}"
        )
    return artifacts, summary


def cmd_run(args) -> int:
    try:
        artifacts, _ = _run_one(
            args.input, args.seed, MODE_FLAGS.get(args.mode), args.output,
            args.strict, args.years, args.individuals,
            [args.track_indiv] if args.track_indiv is not None else (),
        )
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except Unschedulable as exc:
        print(f"unschedulable: {exc}", file=sys.stderr)
        return 4
    if artifacts.violations:
        print(f"{len(artifacts.violations)} invariant violations logged")
    return 0


def cmd_validate(args) -> int:
    try:
        with open(args.input, encoding="utf-8") as fh:
            model = parse_config(fh.read())
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    diags = validate_config(model)
    for d in diags:
        print(d)
    if any(d.severity == "error" for d in diags):
        return 2
    print(
        f"ok: {len(model.goods)} goods, {len(model.producers)} producers, "
        f"{len(diags)} diagnostics"
    )
    return 0


def cmd_inspect(args) -> int:
    """Re-run deterministically and emit indiv_<id>.csv for one individual."""
    args.track_indiv = args.indiv
    return cmd_run(args)


def _sweep_worker(job):
    path, seed, mode, out_dir, strict = job
    _, summary = _run_one(path, seed, mode, out_dir, strict, None, None, (),
                          quiet=True)
    return seed, summary


def cmd_sweep(args) -> int:
    jobs = [
        (
            args.input,
            args.seed + i,
            MODE_FLAGS.get(args.mode),
            os.path.join(args.output, f"seed_{args.seed + i}"),
            args.strict,
        )
        for i in range(args.seeds)
    ]
    results = []
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_sweep_worker, jobs))
        else:
            results = [_sweep_worker(job) for job in jobs]
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except Unschedulable as exc:
        print(f"unschedulable: {exc}", file=sys.stderr)
        return 4
    lines = {}
    for seed, summary in sorted(results):
        for key, value in summary.items():
            lines[f"seed_{seed}.{key}"] = value
    write_summary(os.path.join(args.output, "sweep_summary.txt"), lines)
    print(f"sweep complete: {len(results)} runs in {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deploysim",
        description="agent-based economy/robot-colony simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("--input", required=True, help="input definition file")
        if output:
            p.add_argument("--output", default="out", help="artifact directory")
            p.add_argument("--seed", type=int, default=0)
            p.add_argument(
                "--mode", choices=sorted(MODE_FLAGS), default=None,
                help="override the config's mode flags",
            )
            p.add_argument("--years", type=int, default=None)
            p.add_argument("--individuals", type=int, default=None)
            p.add_argument(
                "--strict", action="store_true",
                help="abort on invariant violations (default: log and continue)",
            )

    p_run = sub.add_parser("run", help="simulate and write artifacts")
    common(p_run)
    p_run.add_argument("--track-indiv", type=int, default=None,
                       help="also emit indiv_<id>.csv for this individual")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="parse and lint an input file")
    common(p_val, output=False)
    p_val.set_defaults(func=cmd_validate)

    p_ins = sub.add_parser(
        "inspect", help="re-run deterministically, dump one individual's track"
    )
    common(p_ins)
    p_ins.add_argument("--indiv", type=int, required=True)
    p_ins.set_defaults(func=cmd_inspect)

    p_sweep = sub.add_parser("sweep", help="N independent seeded runs")
    common(p_sweep)
    p_sweep.add_argument("--seeds", type=int, default=5)
    p_sweep.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

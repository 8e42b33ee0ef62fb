"""Command-line entry point.

Verbs:
  run          one scenario replica into a run directory
  sweep        grid x seeds sweep with aggregate CSV and plots
  predict-trap closed-form trap radius / critical gain report
  continuum    run a continuum preset (shortcut for run with mode=continuum)
  metrics      recompute metrics.csv from a run directory's snapshots
"""
from __future__ import annotations

import argparse
import sys

from .config import (ConfigError, MODES, Scenario, load_scenario, parse_value)
from .trap import TrapRegime, predict


def _add_common(sub):
    sub.add_argument("--scenario", help="scenario file (dotted key = value)")
    sub.add_argument("--mode", choices=MODES,
                     help="scenario mode when no file is given")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override a scenario key")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", required=True, help="output directory")


def _build_scenario(args) -> Scenario:
    if args.scenario:
        scn = load_scenario(args.scenario)
    elif args.mode:
        scn = Scenario(mode=args.mode)
    else:
        raise ConfigError("provide --scenario FILE or --mode NAME")
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        scn.override(key.strip(), parse_value(val))
    return scn


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rantsim",
                                     description="RAnt collective construction simulator")
    subs = parser.add_subparsers(dest="verb", required=True)

    p_run = subs.add_parser("run", help="run one scenario replica")
    _add_common(p_run)

    p_sweep = subs.add_parser("sweep", help="run a parameter sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--grid", action="append", default=[],
                         metavar="KEY=V1,V2,...", required=True,
                         help="sweep axis (repeatable)")
    p_sweep.add_argument("--seeds", default="0",
                         help="comma-separated seed list")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--no-plots", action="store_true")

    p_trap = subs.add_parser("predict-trap", help="closed-form trap report")
    p_trap.add_argument("--L-w", type=float, required=True,
                        help="production diameter / sensor gap")
    p_trap.add_argument("--L-minus", type=float, required=True,
                        help="decay length / sensor gap")
    p_trap.add_argument("--k-hat", type=float, default=1.0,
                        help="production/decay ratio")
    p_trap.add_argument("--G", type=float, default=None,
                        help="nondimensional gain (needed in slow decay)")

    p_cont = subs.add_parser("continuum", help="run a continuum preset")
    _add_common(p_cont)
    p_cont.add_argument("--preset", choices=("construction", "deconstruction"),
                        default=None)

    p_met = subs.add_parser("metrics", help="recompute metrics from snapshots")
    p_met.add_argument("--run-dir", required=True)
    p_met.add_argument("--out", default=None, help="output CSV path")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    from . import harness

    if args.verb == "run":
        rundir = harness.run(_build_scenario(args), args.seed, args.out)
        print(rundir)
        return 0

    if args.verb == "sweep":
        scn = _build_scenario(args)
        grid = {}
        for item in args.grid:
            if "=" not in item:
                raise ConfigError(f"--grid expects KEY=V1,V2..., got {item!r}")
            key, vals = item.split("=", 1)
            parsed = parse_value(vals)
            grid[key.strip()] = parsed if isinstance(parsed, list) else [parsed]
        seeds = parse_value(args.seeds)
        seeds = seeds if isinstance(seeds, list) else [seeds]
        outdir = harness.sweep(scn, grid, seeds, args.out, jobs=args.jobs,
                               plot=not args.no_plots)
        print(outdir)
        return 0

    if args.verb == "predict-trap":
        regime = TrapRegime(L_w=args.L_w, L_minus=args.L_minus, k_hat=args.k_hat)
        pred = predict(regime, G_nd=args.G)
        print(f"regime = {pred.regime}")
        print(f"branch = {pred.branch}")
        print(f"r_star = {'untrappable' if pred.r_star is None else f'{pred.r_star:.6g}'}")
        print(f"G_c = {pred.G_c:.6g}")
        return 0

    if args.verb == "continuum":
        scn = _build_scenario(args) if (args.scenario or args.mode) else \
            Scenario(mode="continuum")
        if args.preset:
            scn.override("cont.preset", args.preset)
        rundir = harness.run(scn, args.seed, args.out)
        print(rundir)
        return 0

    if args.verb == "metrics":
        out = harness.recompute_metrics(args.run_dir, args.out)
        print(out)
        return 0

    raise ConfigError(f"unknown verb {args.verb!r}")


if __name__ == "__main__":
    sys.exit(main())

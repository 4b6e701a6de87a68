"""Command-line experiment runner.

Subcommands:
    run <config.json>        multi-trial sampler experiment, CSV outputs
    compare <dir> [<dir>..]  merge per-algorithm curves, W1 against an mh run
    track <config.json>      regime-switching tracking experiment
    validate                 built-in oracle suite, nonzero exit on failure

Relative output directories resolve under $SKEWSGLD_OUT_ROOT when set.
"""

from __future__ import annotations

import argparse
import sys

from .config import (
    ConfigError,
    load_experiment_config,
    load_tracking_config,
)
from .harness import compare_runs, run_experiment, run_tracking_experiment
from .samplers import SamplerDivergedError
from . import validate as validate_mod


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    if getattr(args, "max_parallel", None) is not None:
        cfg.max_parallel = args.max_parallel
    if getattr(args, "snapshot_every", None) is not None:
        cfg.snapshot_every = args.snapshot_every
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_experiment_config(args.config), args)
    out = run_experiment(cfg, out_override=args.out, progress=lambda msg: print(msg))
    print(f"wrote outputs to {out}")
    return 0


def cmd_compare(args) -> int:
    result = compare_runs(args.dirs, args.out)
    print(f"wrote {result['rows']} curve rows to {result['curves_csv']}")
    if result["w1_csv"]:
        print(f"wrote W1-to-mh table to {result['w1_csv']}")
    else:
        print("no mh run among the inputs; skipped the W1 table")
    return 0


def cmd_track(args) -> int:
    cfg = load_tracking_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    out = run_tracking_experiment(cfg, out_override=args.out)
    print(f"wrote tracking outputs to {out}")
    return 0


def cmd_validate(args) -> int:
    results = validate_mod.run_all()
    width = max(len(r.name) for r in results)
    all_pass = True
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}s}  {r.detail}")
        all_pass &= r.passed
    print(f"{'all checks passed' if all_pass else 'CHECKS FAILED'}")
    return 0 if all_pass else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skewsgld",
        description="Non-reversible Langevin sampling experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a sampler experiment from a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="override the config output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the base seed")
    p_run.add_argument("--max-parallel", type=int, default=None, dest="max_parallel")
    p_run.add_argument("--snapshot-every", type=int, default=None, dest="snapshot_every")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="compare two or more algorithm run directories")
    p_cmp.add_argument("dirs", nargs="+")
    p_cmp.add_argument("--out", default="comparison.csv")
    p_cmp.set_defaults(func=cmd_compare)

    p_trk = sub.add_parser("track", help="run a regime-switching tracking experiment")
    p_trk.add_argument("config")
    p_trk.add_argument("--out", default=None)
    p_trk.add_argument("--seed", type=int, default=None)
    p_trk.set_defaults(func=cmd_track)

    p_val = sub.add_parser("validate", help="run the built-in oracle suite")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except SamplerDivergedError as err:
        print(f"sampler error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

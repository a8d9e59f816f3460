"""Command-line entry point: ``hvgnep {cycles,coupled-game} [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import ConfigError, ExperimentSpec, parse_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hvgnep",
        description="Select a generalized Nash equilibrium with the safeguarded hybrid steepest descent method.")
    sub = parser.add_subparsers(dest="family", required=True, metavar="{cycles,coupled-game}")
    for name, help_ in (("cycles", "cycles of projections onto random boxes"),
                        ("coupled-game", "linearly coupled game with a shared aggregate bound")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", metavar="PATH", help="flat key = value config file (see docs/config.md)")
        p.add_argument("--seed", type=int, help="instance seed")
        p.add_argument("--iters", type=int, help="iteration budget per run")
        p.add_argument("--algo", choices=("fbf", "hsdm", "both"))
        p.add_argument("--inits", type=int, help="number of initial points")
        p.add_argument("--out", metavar="PREFIX", help="output path prefix for CSV traces and the summary")
        p.add_argument("--literal-line6", action="store_true", default=None,
                       help="use the dual update u - gamma P_D(u/gamma + Lx) without the forward shift")
        p.add_argument("--selector", choices=("consensus", "cycle", "none"))
        p.add_argument("--workers", type=int, help="parallel processes for independent runs")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def spec_from_args(args) -> ExperimentSpec:
    spec = parse_config(args.config, args.family) if args.config else ExperimentSpec.defaults(args.family)
    changes = {k: v for k, v in (("seed", args.seed), ("max_iters", args.iters), ("algo", args.algo),
                                 ("init_count", args.inits), ("out", args.out),
                                 ("literal_line6", args.literal_line6), ("selector", args.selector),
                                 ("workers", args.workers)) if v is not None}
    return spec.with_(**changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        spec = spec_from_args(args)
        results = run_experiment(spec)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"hvgnep: error: {exc}", file=sys.stderr)
        return 2
    for r in results:
        if r.ok:
            t = r.trace
            print(f"{r.name}: iters={t.iterations_run} fix_residual={t.final_residual:.3e} "
                  f"costs=[{', '.join(f'{c:.6g}' for c in t.final_costs)}] -> {r.path}")
        else:
            print(f"{r.name}: {r.error}")
    print(f"summary -> {spec.out}-summary.txt")
    return 0 if all(r.ok for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())

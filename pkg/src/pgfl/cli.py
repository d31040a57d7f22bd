"""Command line entry: run configs, recipes, the accountant, validation."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ExperimentConfig
from .errors import ConfigurationError
from .experiments import run_experiment
from .privacy import total_privacy_loss
from .recipes import recipe_summaries, run_recipe

__all__ = ["main"]


def _default_out() -> str:
    return os.environ.get("PGFL_OUT_DIR", "results")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pgfl",
        description="Personalized graph federated learning simulator",
        epilog="recipes:\n" + recipe_summaries(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config file")
    p_run.add_argument("config_file", help="path to the config JSON")
    p_run.add_argument("--out", default=None, help="output directory "
                       "(default: $PGFL_OUT_DIR or ./results)")
    p_run.add_argument("--name", default=None, help="bundle name "
                       "(default: config file stem)")

    p_recipe = sub.add_parser("recipe", help="run a named built-in recipe")
    p_recipe.add_argument("name", help="recipe name (see --help epilog)")
    p_recipe.add_argument("--seed", type=int, default=None, help="master seed override")
    p_recipe.add_argument("--out", default=None, help="output directory "
                          "(default: $PGFL_OUT_DIR or ./results)")
    p_recipe.add_argument("--iterations", type=int, default=None,
                          help="iteration-count override")
    p_recipe.add_argument("--replicates", type=int, default=None,
                          help="replicate-count override")

    p_acct = sub.add_parser(
        "accountant", help="print the cumulative (epsilon, delta) privacy loss"
    )
    p_acct.add_argument("--phi1", type=float, required=True,
                        help="leakage of the first transmission")
    p_acct.add_argument("--zeta", type=float, required=True,
                        help="variance decay ratio in (0,1)")
    p_acct.add_argument("--n", type=int, required=True, help="iteration count")
    p_acct.add_argument("--delta", type=float, required=True,
                        help="target DP delta in (0,1)")

    p_val = sub.add_parser("validate", help="check a config file and exit")
    p_val.add_argument("config_file", help="path to the config JSON")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = ExperimentConfig.from_json_file(args.config_file)
            name = args.name or Path(args.config_file).stem
            out = args.out or _default_out()
            run_experiment(config, out, name=name, quiet=False)
            return 0
        if args.command == "recipe":
            out = args.out or _default_out()
            run_recipe(
                args.name,
                out,
                seed=args.seed,
                iterations=args.iterations,
                replicates=args.replicates,
                quiet=False,
            )
            return 0
        if args.command == "accountant":
            print(repr(total_privacy_loss(args.phi1, args.zeta, args.n, args.delta)))
            return 0
        if args.command == "validate":
            ExperimentConfig.from_json_file(args.config_file)
            print("config ok")
            return 0
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable: argparse enforces a command")


if __name__ == "__main__":
    sys.exit(main())

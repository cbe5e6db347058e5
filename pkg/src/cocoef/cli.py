"""Command-line interface.

Subcommands:
    run CONFIG [--out PATH]        run one experiment from a config file
    preset NAME [--outdir DIR]     run a figure preset, one CSV per method
    theory ...                     print the convergence constants and bound curve
    validate                       run the built-in invariant suite

Exit status is 0 on success and nonzero with a diagnostic on invalid
configs or invariant violations.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigurationError, InvariantViolation
from .presets import PRESET_NAMES, preset_configs
from .runner import emit_csv, run_experiment
from .theory import TheoryInputs, bound_constants, convergence_bound
from .validate import run_invariant_suite


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    metrics = run_experiment(config)
    out = Path(args.out) if args.out else Path(args.config).with_suffix(".csv").name
    emit_csv(metrics, out)
    print(f"wrote {out} and {out}.summary "
          f"(final mean loss {metrics.final_loss_mean():.6g})")
    return 0


def _cmd_preset(args: argparse.Namespace) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for label, config in preset_configs(args.name, trials=args.trials).items():
        metrics = run_experiment(config)
        path = outdir / f"{args.name}_{label}.csv"
        emit_csv(metrics, path)
        print(f"{args.name} {label}: final mean loss "
              f"{metrics.final_loss_mean():.6g} -> {path}")
    return 0


def _cmd_theory(args: argparse.Namespace) -> int:
    if (args.vartheta is None) == (args.replication is None):
        raise ConfigurationError("give exactly one of --vartheta or --replication")
    if args.vartheta is not None:
        theta = args.vartheta
    else:
        theta = args.subsets * (1.0 / args.replication - 1.0 / args.devices)
    inputs = TheoryInputs(
        p=args.p,
        delta=args.delta,
        qa=args.qa,
        num_devices=args.devices,
        num_subsets=args.subsets,
        vartheta=theta,
        smoothness=args.smoothness,
        heterogeneity=args.heterogeneity,
        initial_loss=args.initial_loss,
        min_loss=args.min_loss,
        lr_scale=args.lr_scale,
    )
    constants = bound_constants(inputs)
    print(f"vartheta = {theta!r}")
    print(f"xi1 = {constants.xi1!r}")
    print(f"xi2 = {constants.xi2!r}")
    print(f"eps0 = {constants.eps0!r}")
    print(f"eps1 = {constants.eps1!r}")
    print("T,bound")
    for token in args.horizons.split(","):
        horizon = int(token)
        value = convergence_bound(horizon, inputs, constants)
        print(f"{horizon},{value!r}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    return 0 if run_invariant_suite(verbose=True) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cocoef",
        description="Simulator for gradient-coded distributed SGD with "
        "biased compression and error feedback under Bernoulli stragglers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("config", help="path to a key=value config file")
    p_run.add_argument("--out", help="metrics CSV path (default: <config>.csv)")
    p_run.set_defaults(func=_cmd_run)

    p_preset = sub.add_parser("preset", help="run a figure-reproduction preset")
    p_preset.add_argument("name", choices=PRESET_NAMES)
    p_preset.add_argument("--outdir", default="results", help="output directory")
    p_preset.add_argument("--trials", type=int, default=5)
    p_preset.set_defaults(func=_cmd_preset)

    p_theory = sub.add_parser(
        "theory", help="print convergence constants and the bound curve"
    )
    p_theory.add_argument("--p", type=float, required=True)
    p_theory.add_argument("--delta", type=float, required=True)
    p_theory.add_argument("--qa", type=float, required=True)
    p_theory.add_argument("--devices", type=int, required=True)
    p_theory.add_argument("--subsets", type=int, required=True)
    p_theory.add_argument("--vartheta", type=float)
    p_theory.add_argument("--replication", type=int,
                          help="uniform d, used to derive vartheta")
    p_theory.add_argument("--smoothness", type=float, required=True)
    p_theory.add_argument("--heterogeneity", type=float, required=True)
    p_theory.add_argument("--initial-loss", type=float, required=True)
    p_theory.add_argument("--min-loss", type=float, required=True)
    p_theory.add_argument("--lr-scale", type=float, required=True)
    p_theory.add_argument("--horizons", default="100,1000,10000,100000",
                          help="comma-separated iteration counts")
    p_theory.set_defaults(func=_cmd_theory)

    p_validate = sub.add_parser("validate", help="run the invariant suite")
    p_validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())

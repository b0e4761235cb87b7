"""Command-line entry point: ``hdmf <subcommand> [--seed N] [--out PATH] ...``"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .queue import NonErgodicChainError

SUBCOMMANDS = {
    "per-sweep": "per_sweep",
    "ser-sweep": "ser_sweep",
    "theory-vs-sim": "theory_vs_sim",
    "queue": "queue_analysis",
    "select-probs": "selection_probs",
}

# defaults that differ from the per-sweep ones
KIND_DEFAULTS = {
    "ser_sweep": {"modulation": "BPSK", "ebn0_db": [5.0, 10.0, 15.0, 20.0, 25.0, 30.0]},
    "theory_vs_sim": {"modulation": "BPSK", "ebn0_db": [10.0, 15.0, 20.0, 25.0, 30.0]},
    "selection_probs": {"packets": 20_000},
}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="unsigned 64-bit master seed")
    common.add_argument("--out", help="CSV destination (default stdout)")
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--packets", type=int, help="packets per point")
    parser = argparse.ArgumentParser(prog="hdmf", description="Hybrid DMF two-way relay experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def make_config(args) -> harness.ExperimentConfig:
    kind = SUBCOMMANDS[args.command]
    overrides = dict(KIND_DEFAULTS.get(kind, {}))
    if args.config:
        base = harness.load_config(args.config, kind=kind)
        overrides = {}
    else:
        base = harness.ExperimentConfig(kind=kind)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.packets is not None:
        overrides["packets"] = args.packets
    try:
        return replace(base, **overrides)
    except TypeError as exc:
        raise harness.ConfigError(str(exc)) from None


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = make_config(args)
        rows = harness.run(cfg)
        text = harness.to_csv(cfg.kind, rows)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonErgodicChainError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import (
    ADJUSTED,
    AS_PRINTED,
    DEFAULT_HOPF,
    DEFAULT_SWEEP,
    ConfigError,
    load_config,
    parse_config,
    preset_figure,
)
from .models import DomainError
from .ode import CapabilityError, NumericalFailure
from .runner import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _common(p: argparse.ArgumentParser, config_required: bool) -> None:
    p.add_argument("--config", metavar="PATH", required=config_required, help="JSON experiment document")
    p.add_argument("--out-dir", metavar="PATH", default=".", help="directory for output files (default: .)")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="table format (default from config: csv)")
    p.add_argument("--svg", action=argparse.BooleanOptionalAction, default=None, help="write SVG images")
    p.add_argument("--seed", type=int, default=None, metavar="N", help="seed for randomized test points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curlmod",
        description="Integrable time-modulated oscillators: simulation, invariants and stability.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("simulate", help="integrate a configured system"), True)
    _common(sub.add_parser("invariants", help="first-integral drift and Poisson-bracket check"), True)
    _common(sub.add_parser("floquet", help="monodromy matrix and Floquet multipliers"), True)
    _common(sub.add_parser("sweep", help="stability chart over a parameter grid"), False)
    fig = sub.add_parser("figure", help="run a figure preset")
    fig.add_argument("which", type=int, choices=(1, 2, 3))
    fig.add_argument(
        "--variant", choices=(AS_PRINTED, ADJUSTED), default=ADJUSTED,
        help=f"parameter set to run (default: {ADJUSTED})",
    )
    _common(fig, False)
    _common(sub.add_parser("hopf", help="adaptive-frequency Hopf experiment"), False)
    return parser


def _override(cfg, args):
    outputs = cfg.outputs
    if args.format is not None:
        outputs = dataclasses.replace(outputs, format=args.format)
    if args.svg is not None:
        outputs = dataclasses.replace(outputs, svg=args.svg)
    cfg = dataclasses.replace(cfg, outputs=outputs)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be non-negative", "seed")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _load(args):
    extra = None
    if args.command == "figure":
        if args.config:
            raise ConfigError("figure presets do not take --config", "config")
        preset = preset_figure(args.which)
        extra = {
            "preset": {
                "figure": preset.number,
                "record": preset.record,
                "variant": args.variant,
                "variants": {
                    label: (str(c) if isinstance(c, ConfigError) else preset.documents[label])
                    for label, c in preset.configs.items()
                },
            }
        }
        return preset.variant(args.variant), "simulate", extra
    if args.config:
        cfg = load_config(args.config)
    elif args.command == "sweep":
        cfg = parse_config(json.dumps(DEFAULT_SWEEP))
    elif args.command == "hopf":
        cfg = parse_config(json.dumps(DEFAULT_HOPF))
    else:
        raise ConfigError("--config is required")
    return cfg, args.command, extra


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, mode, extra = _load(args)
        cfg = _override(cfg, args)
        art = run(cfg, args.out_dir, mode, extra)
    except (ConfigError, DomainError, CapabilityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    for name, path in art.files.items():
        print(f"{name}: {path}")
    if art.failed:
        f = art.summary["failure"]
        print(f"numerical failure: {f['kind']} at t={f['t']}: {f['message']}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

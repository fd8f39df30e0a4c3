"""Command line interface.

Subcommands ``fig3b``, ``fig3d`` and ``custom`` run the corresponding
scenario and write CSV/JSON files under ``--out``.  Failures exit
nonzero after printing a machine-readable JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .runner import MODES, ConfigError, default_config, load_config, run_scenario


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wmqkd",
        description=("Wavelength-multiplexed entanglement-based QKD "
                     "simulator and key-rate analysis"),
    )
    sub = p.add_subparsers(dest="scenario", required=True)
    for name, desc in (
        ("fig3b", "two-channel multiplexed vs merged key-rate sweep over loss"),
        ("fig3d", "analytic n-channel scaling and bandwidth degradation curves"),
        ("custom", "user-defined sweep from a configuration file"),
    ):
        s = sub.add_parser(name, help=desc)
        s.add_argument("--config", help="JSON run-configuration file")
        s.add_argument("--seed", type=int, help="override the run seed")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--mode", choices=MODES, help="montecarlo | analytic | both")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            config = load_config(args.config)
            if config.scenario != args.scenario:
                raise ConfigError(
                    "scenario",
                    f"config file declares {config.scenario!r} but the "
                    f"{args.scenario!r} subcommand was invoked",
                )
        else:
            config = default_config(args.scenario)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.mode is not None:
            overrides["mode"] = args.mode
        if overrides:
            config = replace(config, **overrides)
        report = run_scenario(config, args.out)
    except ConfigError as exc:
        _emit_error("config_error", str(exc), field=exc.field)
        return 2
    except Exception as exc:
        _emit_error(type(exc).__name__, str(exc))
        return 1
    n_warn = len(report.get("warnings", []))
    print(f"{args.scenario}: wrote results to {args.out} "
          f"({n_warn} warning{'s' if n_warn != 1 else ''})")
    return 0


def _emit_error(kind: str, message: str, **extra):
    record = {"error": kind, "message": message}
    record.update(extra)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

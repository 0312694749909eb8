"""Command line: ``qtelesim <mode> --config FILE [--seed N] [--trials N] [--eve] [--out DIR] [--jobs N]``.

Prints the scenario report as one JSON object on stdout. Failures print
``{"error": <category>, "message": ...}`` on stderr and exit non-zero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import MODES, ScenarioConfig, load_config
from .errors import QTeleSimError
from .scenario import canonical_json, run_scenario

EXIT_CODES = {"parse_error": 2, "validation_error": 2, "io_error": 3}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qtelesim", description="Teleportation / key-exchange robot control simulator")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", metavar="FILE", help="YAML or JSON scenario config")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--eve", action="store_true", help="enable the intercept-resend eavesdropper")
    p.add_argument("--out", metavar="DIR", help="output directory (QTELESIM_OUT takes precedence)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for independent trials")
    return p


def resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    changes = {"mode": args.mode}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.eve:
        changes["eve_enabled"] = True
    out = os.environ.get("QTELESIM_OUT") or args.out
    if out:
        changes["output_dir"] = out
    return cfg.replace(**changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise QTeleSimError("--jobs must be >= 1")
        cfg = resolve_config(args)
        report = run_scenario(cfg, jobs=args.jobs)
    except QTeleSimError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}), file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(json.dumps({"error": "io_error", "message": str(exc)}), file=sys.stderr)
        return 3
    print(canonical_json({**report.to_dict(), "output_dir": report.output_dir}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point.

    ibnls run <config>
    ibnls audit cutoff|inequality <config>
    ibnls sweep <config>

Exit status: 0 PASS, 1 property FAIL, 2 invalid configuration, 3 non-finite
field. ``IBNLS_THREADS`` caps the number of concurrent sweep cells.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import parse_config
from .errors import ConfigInvalid, NonFiniteField
from .runner import EXIT_CONFIG, EXIT_NONFINITE, run_scenario, run_sweep

AUDITS = {"cutoff": "cutoff-audit", "inequality": "inequality-audit"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ibnls", description="Biharmonic NLS simulator and verification audits")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the scenario named in the config")
    run.add_argument("config")
    audit = sub.add_parser("audit", help="run a static audit")
    audit.add_argument("kind", choices=sorted(AUDITS))
    audit.add_argument("config")
    sweep = sub.add_parser("sweep", help="verdict table over amplitude x b x nu")
    sweep.add_argument("config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.command == "audit":
            cfg = replace(cfg, scenario=AUDITS[args.kind])
            result = run_scenario(cfg)
        elif args.command == "sweep":
            result = run_sweep(cfg)
        else:
            result = run_scenario(cfg)
    except ConfigInvalid as exc:
        print("configuration invalid:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteField as exc:
        print(f"non-finite field: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    print(result.to_text())
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line interface: ``preytaxis run|equilibria|sweep|check``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config, parse_config
from .errors import PreyTaxisError


def _load(path):
    if path is None:
        return parse_config("")
    return load_config(path)


def cmd_run(args):
    from .runner import EXIT_CODES, execute_run

    cfg = _load(args.config)
    result, run_dir = execute_run(cfg, args.out)
    print(f"{result.status}: {run_dir}" + (f" ({result.message})" if result.message else ""))
    return EXIT_CODES.get(result.status, 1)


def cmd_equilibria(args):
    from .runner import equilibria_report

    report = equilibria_report(_load(args.config))
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_sweep(args):
    from .runner import sweep

    csv = sweep(_load(args.config), args.axis, jobs=args.jobs)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
    else:
        sys.stdout.write(csv)
    return 0


def cmd_check(args):
    from .checks import SUITES, run_suites

    names = args.suite or list(SUITES)
    results = run_suites(names)
    for name, (ok, detail) in results.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for ok, _ in results.values()) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="preytaxis", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration")
    p.add_argument("--config", help="config file (defaults apply when omitted)")
    p.add_argument("--out", help="root directory for run folders (overrides [output] dir)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("equilibria", help="list and classify the constant steady states")
    p.add_argument("--config")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("sweep", help="stability map over one or two parameters")
    p.add_argument("--config")
    p.add_argument("--axis", action="append", required=True, help='"name:lo:hi:count", repeatable up to twice')
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run invariant suites")
    p.add_argument("--suite", action="append", help="suite name, repeatable (all when omitted)")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PreyTaxisError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""``jump`` command line: run scenarios, sweep parameters, dump launch profiles."""

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .harness import EXIT_CONFIG, EXIT_OK, ScenarioError


def _parse_params(items):
    """Jump parameters from a JSON file, an inline JSON object or ``key=value`` pairs."""
    if len(items) == 1 and Path(items[0]).is_file():
        d = harness.load_json(items[0])
        return d.get("jump", d)
    if len(items) == 1 and items[0].lstrip().startswith("{"):
        try:
            return json.loads(items[0])
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"bad parameter JSON: {exc}") from exc
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ScenarioError(f"expected key=value, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="jump", description="Squat-jump simulation experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and check its expectations")
    r.add_argument("scenario", help="scenario JSON file")
    r.add_argument("--out", help="artifact directory (default: the scenario's output entry)")
    r.add_argument("--dump-qp", action="store_true", help="write failed_qp.txt when a launch QP fails")
    s = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    s.add_argument("scenario", help="scenario JSON file")
    s.add_argument("--grid", required=True, help='grid JSON: {"controller.gains.K_H": [0, 100], ...}')
    s.add_argument("--out", help="CSV path (default: <output>/sweep.csv)")
    d = sub.add_parser("dump-profile", help="write the launch profile for jump parameters as CSV")
    d.add_argument("params", nargs="+", help="JSON file, inline JSON, or key=value pairs (height, displacement, ...)")
    d.add_argument("--dt", type=float, default=1e-3, help="sample step [s]")
    d.add_argument("--out", help="CSV path (default: stdout)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            sc = harness.load_scenario(args.scenario)
            harness.threads()
            return harness.run_scenario(sc, args.out, dump_qp=args.dump_qp)
        if args.command == "sweep":
            path = Path(args.scenario)
            d = harness.load_json(path)
            grid = harness.load_json(args.grid)
            harness.threads()
            out = harness.sweep(d, grid, path.parent, args.out)
            print(out)
            return EXIT_OK
        params = _parse_params(args.params)
        harness.dump_profile(params, args.out or sys.stdout, args.dt)
        return EXIT_OK
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

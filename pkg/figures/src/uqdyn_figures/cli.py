"""Command-line interface: ``figures render <spec.json>``.

Exit codes: 0 success, 2 spec or schema error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .render import render
from .schema import SchemaError


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render paper-style figures from harness CSV artifacts",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    render_p = sub.add_parser("render", help="render one figure spec")
    render_p.add_argument("spec", help="path to a figure-spec JSON file")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        with open(args.spec, encoding="utf-8") as f:
            spec = json.load(f)
    except (OSError, json.JSONDecodeError) as err:
        print(f"cannot read figure spec: {err}", file=sys.stderr)
        return 2
    try:
        output = render(spec)
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

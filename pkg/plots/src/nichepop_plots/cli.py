"""Command-line entry point: one figure per invocation.

Exit codes: 0 success, 1 usage/schema error, 2 unexpected runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import PlotKind, PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nichepop-plots",
        description="Render a figure from nichepop experiment CSV output.",
    )
    parser.add_argument(
        "--kind", required=True, choices=[k.value for k in PlotKind],
        help="figure type",
    )
    parser.add_argument("--in", dest="input_path", required=True, help="input CSV file")
    parser.add_argument("--out", dest="output_path", required=True, help="output image file")
    parser.add_argument("--title", help="figure title override")
    parser.add_argument("--condition", help="trajectories: condition label to trace")
    parser.add_argument("--seed", type=int, help="trajectories: trial seed to trace")
    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = int(exc.code or 0)
        return 1 if code == 2 else code
    spec = PlotSpec(
        kind=PlotKind(args.kind),
        input_path=Path(args.input_path),
        output_path=Path(args.output_path),
        title=args.title,
        condition=args.condition,
        seed=args.seed,
    )
    try:
        out = render(spec)
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()

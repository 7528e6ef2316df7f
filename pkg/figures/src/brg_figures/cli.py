"""Command line entry point: regenerate figures from a results directory."""
from __future__ import annotations

import argparse
import sys

from .catalog import FIGURE_IDS
from .render import render_all

__all__ = ["main"]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="brg-figures", description="Regenerate figures from experiment outputs"
    )
    parser.add_argument("--results", required=True, help="directory with E*_*.csv / E*_summary.json")
    parser.add_argument("--out", required=True, help="output directory for images and tables")
    parser.add_argument(
        "--only",
        help=f"comma-separated figure ids to render (subset of {','.join(FIGURE_IDS)})",
    )
    args = parser.parse_args(argv)

    only: tuple[str, ...] | None = None
    if args.only:
        only = tuple(x.strip().upper() for x in args.only.split(",") if x.strip())
        unknown = [x for x in only if x not in FIGURE_IDS]
        if unknown:
            print(f"error: unknown figure ids {unknown}", file=sys.stderr)
            return 2

    manifest = render_all(args.results, args.out, only)
    for figure_id, paths in manifest["rendered"].items():
        print(f"{figure_id}: {', '.join(paths)}")
    for figure_id, reason in manifest["skipped"].items():
        print(f"{figure_id}: skipped ({reason})", file=sys.stderr)
    requested = len(only) if only else len(FIGURE_IDS)
    if not manifest["rendered"]:
        return 1
    return 0 if len(manifest["rendered"]) == requested else 3


if __name__ == "__main__":
    sys.exit(main())

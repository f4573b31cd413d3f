"""Command line entry: lldash-plot --kind <k> --runs <csv> ... --out <png>."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="lldash-plot", description="Render figures from simulator results"
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--runs", required=True, help="runs.csv from a simulation")
    parser.add_argument("--aggregate", help="aggregate.csv (band/qoe-curve)")
    parser.add_argument("--profile", help="bandwidth profile CSV (heatmap overlay)")
    parser.add_argument("--logs", help="per-run event log directory (default: <runs dir>/logs)")
    parser.add_argument("--profile-name", help="profile to plot when runs cover several")
    parser.add_argument("--target", type=float, help="latency target lane for the heatmap")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec(
            kind=args.kind,
            runs=args.runs,
            out=args.out,
            aggregate=args.aggregate,
            profile=args.profile,
            logs=args.logs,
            profile_name=args.profile_name,
            target=args.target,
        )
        path = render(spec)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

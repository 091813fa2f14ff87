"""Command-line renderer: `plot --kind curve|pref --in a.csv [b.csv ...] --out fig.png`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from smarplots.figures import PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot",
        description="render smarlab analysis CSVs as figures")
    parser.add_argument("--kind", required=True, choices=["curve", "pref"],
                        help="curve: per-layer distance envelopes; "
                             "pref: per-expert modality shares")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input CSV path(s); curve overlays one "
                                            "series per file")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--band", nargs=2, type=float, metavar=("D_MIN", "D_MAX"),
                        help="draw horizontal band lines (curve figures)")
    parser.add_argument("--title", help="figure title")
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(
            kind=ns.kind,
            inputs=tuple(Path(p) for p in ns.inputs),
            output=Path(ns.out),
            title=ns.title,
            band=(ns.band[0], ns.band[1]) if ns.band is not None else None,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    shape = "placeholder (no data)" if summary.placeholder else (
        f"{summary.n_series} series, {summary.n_axes} axes")
    print(f"wrote {ns.out}: {summary.kind} figure, {shape}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

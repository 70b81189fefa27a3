"""Command-line entry point for the MAT-to-SSVB converter."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .convert import convert_directory
from .layout import BenchmarkLayout, load_layout
from .matread import MatReadError


def parse_subjects(text: str) -> list[int]:
    """Parse '1-35' or '1,4,7' style subject selections."""
    ids: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            ids.extend(range(int(lo), int(hi) + 1))
        elif part:
            ids.append(int(part))
    return ids


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssvep-convert",
        description="Convert per-subject benchmark MAT recordings into an SSVB trial store.",
    )
    parser.add_argument("--mat-dir", required=True, help="directory holding S<N>.mat files")
    parser.add_argument("--out", required=True, help="output .ssvb path")
    parser.add_argument("--layout", default=None, help="layout JSON overriding the defaults")
    parser.add_argument("--manifest", default=None,
                        help="manifest JSON path (default: <out>.manifest.json)")
    parser.add_argument("--subjects", default=None, help="subject selection, e.g. 1-35 or 2,5")
    parser.add_argument("--jobs", type=int, default=1, help="parallel file readers")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        layout = load_layout(args.layout) if args.layout else BenchmarkLayout()
        manifest_path = args.manifest or f"{args.out}.manifest.json"
        manifest = convert_directory(
            mat_dir=args.mat_dir,
            out_path=args.out,
            layout=layout,
            subjects=parse_subjects(args.subjects) if args.subjects else None,
            manifest_path=manifest_path,
            jobs=args.jobs,
        )
    except (MatReadError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for err in manifest["errors"]:
        print(f"subject {err['subject']}: {err['error']}", file=sys.stderr)
    print(
        f"{manifest['n_trials']} trials ({manifest['n_channels']} channels, "
        f"{manifest['samples_per_trial']} samples) -> {args.out}"
    )
    print(f"manifest -> {manifest_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

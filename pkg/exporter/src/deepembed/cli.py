"""Command line: deepembed export --in <dir> --backbone <name> --layer <sel>
--out <file.femb> [--probs <file.csv>]"""

from __future__ import annotations

import argparse
import sys

from .backbones import ALLOWED_BACKBONES, BackboneError
from .export import ExporterConfig, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepembed",
        description="Export vision-backbone embeddings to FEMB files.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="embed an image directory")
    p.add_argument("--in", dest="input_dir", required=True)
    p.add_argument("--backbone", default="tinynet",
                   help=f"one of {sorted(ALLOWED_BACKBONES)}")
    p.add_argument("--layer", choices=["pooled", "spatial"], default="pooled")
    p.add_argument("--out", required=True, help="output .femb path")
    p.add_argument("--probs", default=None, help="optional class-probability CSV")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.add_argument("--exclude", default=None,
                   help="skip files matching this pattern (e.g. '*_mask*')")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExporterConfig(
            input_dir=args.input_dir, backbone=args.backbone, layer=args.layer,
            batch_size=args.batch_size, output_path=args.out,
            probs_path=args.probs, device=args.device, exclude=args.exclude)
        written, skipped = export_embeddings(config)
    except BackboneError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    print(f"wrote {written} embeddings to {args.out}"
          + (f" ({skipped} skipped)" if skipped else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())

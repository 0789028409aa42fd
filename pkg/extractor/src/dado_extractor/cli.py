"""dado-extract: dump attention + depth rasters for a batch of images."""

from __future__ import annotations

import argparse
import glob
import sys
from pathlib import Path

from .backbones import ATTENTION_BACKBONES, DEPTH_BACKBONES
from .extract import ExtractionJob, run_extraction


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dado-extract",
        description="Run pretrained attention/depth models over images and "
                    "write PFM rasters in the discovery pipeline's layout",
    )
    parser.add_argument("--images", required=True,
                        help="glob of input images, e.g. 'photos/*.jpg'")
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--backbone", default="dino-v1-vits16",
                        choices=ATTENTION_BACKBONES)
    parser.add_argument("--dpt", default="dpt-hybrid", choices=DEPTH_BACKBONES)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    paths = [Path(p) for p in sorted(glob.glob(args.images))]
    if not paths:
        print(f"no images match {args.images!r}", file=sys.stderr)
        return 2
    job = ExtractionJob(image_paths=paths, out_dir=args.out,
                        backbone=args.backbone, dpt_variant=args.dpt,
                        device=args.device)
    result = run_extraction(job)
    for stem, reason in result.failed:
        print(f"failed {stem}: {reason}", file=sys.stderr)
    print(f"extracted {len(result.written)} image(s), "
          f"{result.head_count} attention head(s) each -> {args.out}")
    return 0 if result.written and not result.failed else 1


if __name__ == "__main__":
    raise SystemExit(main())

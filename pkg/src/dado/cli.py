"""Command line entry point: discover, eval, viz, synth.

DADO_THREADS caps the number of worker threads used for per-image work
during discovery. Outputs are byte-identical regardless of thread count:
images are processed independently and merged in stem order.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

from .boxes import DetectionSet
from .config import Config
from .evaluation import EvalReport, emit_pr_curve, evaluate
from .map_store import (
    load_record,
    parse_voc_xml,
    read_predictions,
    scan_manifest,
    write_predictions,
)
from .pipeline import discover_record
from .synthgen import generate_suite
from .viz import render_overlay


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("DADO_THREADS", "1")))
    except ValueError:
        return 1


def cmd_discover(input_dir, out_dir, config: Config | None = None) -> dict:
    """Run discovery over a dataset directory; write predictions.jsonl."""
    cfg = config or Config()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries, skipped = scan_manifest(input_dir)

    def process(entry):
        try:
            return discover_record(load_record(entry), cfg)
        except Exception as e:  # keep going; report the stem
            return (entry.stem, f"{type(e).__name__}: {e}")

    threads = _thread_count()
    if threads > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(process, entries))
    else:
        results = [process(e) for e in entries]

    detection_sets: list[DetectionSet] = []
    failed: list[tuple[str, str]] = []
    for r in results:
        if isinstance(r, tuple):
            failed.append(r)
        else:
            detection_sets.append(r)
    pred_path = out / "predictions.jsonl"
    write_predictions(detection_sets, pred_path)
    return {
        "images": len(detection_sets),
        "detections": sum(len(d.detections) for d in detection_sets),
        "skipped": skipped,
        "failed": failed,
        "predictions": str(pred_path),
    }


def _load_annotations(ann_dir) -> list:
    gts = []
    for p in sorted(Path(ann_dir).glob("*.ann.xml")):
        stem = p.name[: -len(".ann.xml")]
        gts.append(parse_voc_xml(p.read_bytes(), stem=stem))
    return gts


def cmd_eval(pred_path, ann_dir, out_dir, config: Config | None = None) -> EvalReport:
    """Score predictions against annotations; write report.json and PR curves."""
    cfg = config or Config()
    all_preds = read_predictions(pred_path)
    gts = _load_annotations(ann_dir)
    if not gts:
        raise SystemExit("eval: no annotations found")
    gt_stems = {g.stem for g in gts}
    if not gt_stems & {p.stem for p in all_preds}:
        raise SystemExit("eval: predictions and annotations share no stems")
    preds = [p for p in all_preds if p.stem in gt_stems]
    report = evaluate(preds, gts, iou_thresh=cfg.iou_thresh)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    for thresh, points in sorted(report.pr_curves.items()):
        emit_pr_curve(points, out / f"pr_{int(round(thresh * 100)):02d}.csv")
    print(f"CorLoc {report.corloc:.1f}")
    print(f"odAP50 {report.odap50:.1f}")
    print(f"odAP@[50:95] {report.odap_coco:.1f}")
    return report


def cmd_viz(input_dir, pred_path, out_dir) -> int:
    """Write an overlay PNG per image with prediction and GT boxes."""
    entries, _skipped = scan_manifest(input_dir)
    by_stem = {p.stem: p for p in read_predictions(pred_path)}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for entry in entries:
        gt = None
        if entry.ann_path is not None:
            gt = parse_voc_xml(entry.ann_path.read_bytes(), stem=entry.stem)
        render_overlay(entry, by_stem.get(entry.stem), gt,
                       out / f"{entry.stem}.overlay.png")
        count += 1
    return count


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="key=value config file (flags override it)")
    for f in fields(Config):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool" or isinstance(f.default, bool):
            parser.add_argument(flag, default=None,
                                action=argparse.BooleanOptionalAction)
        else:
            caster = type(f.default)
            parser.add_argument(flag, type=caster, default=None,
                                metavar=f.name.upper())


def _config_from_args(args) -> Config:
    cfg = Config.from_file(args.config) if args.config else Config()
    overrides = {
        f.name: getattr(args, f.name)
        for f in fields(Config)
        if getattr(args, f.name, None) is not None
    }
    if overrides:
        merged = {f.name: getattr(cfg, f.name) for f in fields(Config)}
        merged.update(overrides)
        cfg = Config(**merged)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dado",
        description="Depth-attention object discovery pipeline and evaluator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="run the pipeline over a dataset directory")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_config_flags(p)

    p = sub.add_parser("eval", help="score a predictions file against annotations")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--ann", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_config_flags(p)

    p = sub.add_parser("viz", help="render overlay PNGs for predictions")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--style", choices=("isolated", "deep"), default="isolated")
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=96)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "discover":
        summary = cmd_discover(args.input, args.out, _config_from_args(args))
        for stem, reason in summary["skipped"]:
            print(f"skipped {stem}: {reason}", file=sys.stderr)
        for stem, reason in summary["failed"]:
            print(f"failed {stem}: {reason}", file=sys.stderr)
        print(
            f"processed {summary['images']} image(s), "
            f"{summary['detections']} detection(s) -> {summary['predictions']}"
        )
        return 0 if summary["images"] > 0 else 2
    if args.command == "eval":
        cmd_eval(args.pred, args.ann, args.out, _config_from_args(args))
        return 0
    if args.command == "viz":
        n = cmd_viz(args.input, args.pred, args.out)
        print(f"rendered {n} overlay(s)")
        return 0
    if args.command == "synth":
        manifest = generate_suite(
            args.scenes, args.seed, args.out,
            width=args.width, height=args.height,
            noise_sigma=args.noise_sigma, style=args.style,
        )
        print(f"wrote {manifest['files']} files for {manifest['scenes']} scene(s)")
        return 0
    return 2


if __name__ == "__main__":
    raise SystemExit(main())

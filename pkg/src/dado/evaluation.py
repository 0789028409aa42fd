"""Class-agnostic localization metrics: CorLoc and odAP.

CorLoc: fraction of annotated images whose top-scoring detection overlaps
some ground-truth box at the IoU threshold. odAP: average precision over
the pooled, score-ranked detections of the whole dataset, matched greedily
one-to-one against ground truth per image. VOC "difficult" boxes act as
don't-care regions: detections landing on them are neither true nor false
positives and the boxes are excluded from the recall denominator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .boxes import DetectionSet, iou
from .map_store import GroundTruth

COCO_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass
class MatchRecord:
    stem: str
    det_index: int  # index into the image's detection list
    score: float
    matched_gt: Optional[int] = None  # GT index within its image
    iou_at_match: float = 0.0
    difficult: bool = False  # matched a don't-care box; excluded from PR


@dataclass
class CorLocResult:
    pct: float
    correct: int
    evaluated: int  # images with at least one GT box
    missing_stems: list[str] = field(default_factory=list)


@dataclass
class EvalReport:
    corloc: float
    odap50: float
    odap_coco: float
    odap_per_threshold: dict[float, float]
    pr_curves: dict[float, list[tuple[float, float]]]
    image_count: int
    gt_count: int
    missing_stems: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "corloc": self.corloc,
            "odap50": self.odap50,
            "odap_coco": self.odap_coco,
            "odap_per_threshold": {f"{t:.2f}": v for t, v in self.odap_per_threshold.items()},
            "pr_curves": {
                f"{t:.2f}": [[r, p] for r, p in points]
                for t, points in self.pr_curves.items()
            },
            "image_count": self.image_count,
            "gt_count": self.gt_count,
            "missing_stems": self.missing_stems,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def corloc(
    preds: Sequence[DetectionSet],
    gts: Sequence[GroundTruth],
    iou_thresh: float = 0.5,
    top1: bool = True,
) -> CorLocResult:
    """Correct-localization percentage over images with at least one GT box.

    An image counts as correct iff its single highest-scoring detection
    reaches the IoU threshold against any GT box (difficult included).
    ``top1=False`` relaxes this to any detection, for sensitivity studies.
    Annotated images missing from the predictions count as incorrect.
    """
    by_stem = {p.stem: p for p in preds}
    correct = 0
    evaluated = 0
    missing = []
    for gt in gts:
        if not gt.objects:
            continue
        evaluated += 1
        pred = by_stem.get(gt.stem)
        if pred is None:
            missing.append(gt.stem)
            continue
        if not pred.detections:
            continue
        candidates = pred.detections[:1] if top1 else pred.detections
        hit = any(
            iou(d.box, o.box) >= iou_thresh for d in candidates for o in gt.objects
        )
        correct += int(hit)
    pct = 100.0 * correct / evaluated if evaluated else 0.0
    return CorLocResult(pct=pct, correct=correct, evaluated=evaluated,
                        missing_stems=missing)


def _pooled_order(preds: Sequence[DetectionSet]) -> list[tuple[str, int]]:
    """Dataset-wide detection order: score descending, ties by stem then box order."""
    items = [
        (-d.score, p.stem, i)
        for p in preds
        for i, d in enumerate(p.detections)
    ]
    items.sort()
    return [(stem, i) for _, stem, i in items]


def match_detections(
    preds: Sequence[DetectionSet],
    gts: Sequence[GroundTruth],
    iou_thresh: float,
) -> tuple[list[MatchRecord], int]:
    """Greedy one-to-one matching of pooled detections against GT.

    Each detection, in pooled score order, takes the not-yet-matched GT box
    in its image with the highest IoU, provided that IoU reaches the
    threshold. Returns the per-detection records (pooled order) and the
    number of non-difficult GT boxes.
    """
    by_stem = {p.stem: p for p in preds}
    gt_by_stem = {g.stem: g for g in gts}
    taken: dict[str, set[int]] = {g.stem: set() for g in gts}
    npos = sum(sum(not o.difficult for o in g.objects) for g in gts)

    records = []
    for stem, det_idx in _pooled_order(preds):
        det = by_stem[stem].detections[det_idx]
        rec = MatchRecord(stem=stem, det_index=det_idx, score=det.score)
        gt = gt_by_stem.get(stem)
        if gt is not None and gt.objects:
            best_iou, best_j = 0.0, None
            for j, obj in enumerate(gt.objects):
                if j in taken[stem]:
                    continue
                v = iou(det.box, obj.box)
                if v > best_iou:
                    best_iou, best_j = v, j
            if best_j is not None and best_iou >= iou_thresh:
                taken[stem].add(best_j)
                rec.matched_gt = best_j
                rec.iou_at_match = best_iou
                rec.difficult = gt.objects[best_j].difficult
        records.append(rec)
    return records, npos


def _ap_from_pr(recalls: np.ndarray, precisions: np.ndarray) -> float:
    """Area under the precision envelope over all recall points."""
    mrec = np.concatenate(([0.0], recalls, [1.0]))
    mpre = np.concatenate(([0.0], precisions, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    idx = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def odap(
    preds: Sequence[DetectionSet],
    gts: Sequence[GroundTruth],
    iou_threshs: Sequence[float] = (0.5,),
) -> tuple[dict[float, float], dict[float, list[tuple[float, float]]]]:
    """Object-discovery AP (scale 0..100) per IoU threshold, plus PR curves.

    Raises ValueError when the dataset has no non-difficult GT boxes.
    """
    aps: dict[float, float] = {}
    curves: dict[float, list[tuple[float, float]]] = {}
    for thresh in iou_threshs:
        records, npos = match_detections(preds, gts, thresh)
        if npos == 0:
            raise ValueError("odAP undefined: no non-difficult ground-truth boxes")
        tp, fp = [], []
        for rec in records:
            if rec.difficult:
                continue  # don't-care match: drop from the PR accumulation
            tp.append(1 if rec.matched_gt is not None else 0)
            fp.append(0 if rec.matched_gt is not None else 1)
        if tp:
            ctp = np.cumsum(tp)
            cfp = np.cumsum(fp)
            recalls = ctp / npos
            precisions = ctp / np.maximum(ctp + cfp, 1)
            aps[thresh] = 100.0 * _ap_from_pr(recalls, precisions)
            curves[thresh] = list(zip(recalls.tolist(), precisions.tolist()))
        else:
            aps[thresh] = 0.0
            curves[thresh] = []
    return aps, curves


def evaluate(
    preds: Sequence[DetectionSet],
    gts: Sequence[GroundTruth],
    iou_thresh: float = 0.5,
    top1: bool = True,
) -> EvalReport:
    """CorLoc at the given threshold plus odAP at 0.50 and 0.50:0.05:0.95."""
    cl = corloc(preds, gts, iou_thresh=iou_thresh, top1=top1)
    threshs = sorted(set(COCO_THRESHOLDS) | {0.5})
    aps, curves = odap(preds, gts, iou_threshs=threshs)
    coco = float(np.mean([aps[t] for t in COCO_THRESHOLDS]))
    return EvalReport(
        corloc=cl.pct,
        odap50=aps[0.5],
        odap_coco=coco,
        odap_per_threshold=aps,
        pr_curves=curves,
        image_count=len(gts),
        gt_count=sum(len(g.objects) for g in gts),
        missing_stems=cl.missing_stems,
    )


def emit_pr_curve(pr_points: Sequence[tuple[float, float]], path) -> None:
    """Write a recall/precision CSV and a matching SVG line plot next to it."""
    path = Path(path)
    lines = ["recall,precision"]
    lines += [f"{r:.10g},{p:.10g}" for r, p in pr_points]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    path.with_suffix(".svg").write_text(_pr_svg(pr_points), encoding="utf-8")


def _pr_svg(points: Sequence[tuple[float, float]], size: int = 400, margin: int = 40) -> str:
    span = size - 2 * margin

    def sx(r: float) -> float:
        return margin + r * span

    def sy(p: float) -> float:
        return size - margin - p * span

    poly = " ".join(f"{sx(r):.2f},{sy(p):.2f}" for r, p in points)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{margin}" y1="{size - margin}" x2="{size - margin}" '
        f'y2="{size - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{size - margin}" '
        f'stroke="black"/>',
        f'<text x="{size // 2}" y="{size - 8}" text-anchor="middle" '
        f'font-size="12">recall</text>',
        f'<text x="12" y="{size // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 12 {size // 2})">precision</text>',
    ]
    if poly:
        parts.append(f'<polyline points="{poly}" fill="none" stroke="#c0392b" '
                     f'stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts)

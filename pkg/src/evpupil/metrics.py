"""Detection scoring: IoU, greedy matching, P/R/F1, AP and PR curves.

Matching follows the standard detection-benchmark recipe: detections below
the confidence threshold are dropped, survivors are processed in
descending confidence, and each takes the unmatched ground truth with the
highest IoU at or above the IoU threshold, else counts as a false
positive. Average precision integrates the area under the monotone
precision envelope of the all-points PR curve.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .detect import Box, Detection

__all__ = [
    "EvalReport",
    "GroundTruth",
    "MatchResult",
    "average_precision",
    "evaluate",
    "iou",
    "match_detections",
    "mean_average_precision",
    "pr_curve",
    "precision_recall_f1",
]


@dataclass(frozen=True)
class GroundTruth:
    """One ground-truth box in pixel space."""

    frame_ref: str
    box: Box
    class_id: int = 0


def _check_box(box: Box, name: str) -> None:
    x_min, y_min, x_max, y_max = box
    if not (x_min < x_max and y_min < y_max):
        raise ValueError(f"degenerate {name} box {box}")


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two non-degenerate boxes."""
    _check_box(a, "first")
    _check_box(b, "second")
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


@dataclass
class MatchResult:
    """Outcome of matching one detection set against one truth set."""

    tp: int
    fp: int
    fn: int
    det_is_tp: list[bool]          # aligned with `kept` (descending confidence)
    kept: list[Detection]          # detections surviving the confidence gate
    gt_matched: list[bool]         # aligned with the input ground truths
    iou_threshold: float
    confidence_threshold: float


def _greedy_frame(
    dets: list[tuple[int, Detection]],
    gts: list[tuple[int, GroundTruth]],
    iou_thr: float,
) -> list[tuple[int, bool, int]]:
    """Sequential greedy matching within one frame.

    Detections are consumed in descending confidence; among equal
    confidences the detection whose best unmatched IoU is larger goes
    first, then input order. Returns (det_index, is_tp, gt_index|-1).
    """
    remaining = list(dets)
    unmatched = {gi for gi, _ in gts}
    results: list[tuple[int, bool, int]] = []
    while remaining:
        top_conf = max(d.confidence for _, d in remaining)
        tier = [(i, d) for i, d in remaining if d.confidence == top_conf]
        best_pick = None  # (picked_pos, best_iou, best_gt)
        for pos, (di, d) in enumerate(tier):
            best_iou, best_gt = -1.0, -1
            for gi, g in gts:
                if gi not in unmatched:
                    continue
                v = iou(d.box, g.box)
                if v > best_iou:
                    best_iou, best_gt = v, gi
            if best_pick is None or best_iou > best_pick[1]:
                best_pick = (pos, best_iou, best_gt)
        pos, best_iou, best_gt = best_pick
        di, d = tier[pos]
        remaining.remove((di, d))
        if best_gt >= 0 and best_iou >= iou_thr:
            unmatched.discard(best_gt)
            results.append((di, True, best_gt))
        else:
            results.append((di, False, -1))
    return results


def match_detections(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruth],
    iou_thr: float = 0.5,
    conf_thr: float = 0.25,
) -> MatchResult:
    """Greedy per-frame matching at fixed IoU and confidence thresholds."""
    kept_idx = [i for i, d in enumerate(detections) if d.confidence >= conf_thr]
    by_frame_det: dict[str, list[tuple[int, Detection]]] = {}
    for i in kept_idx:
        by_frame_det.setdefault(detections[i].frame_ref, []).append((i, detections[i]))
    by_frame_gt: dict[str, list[tuple[int, GroundTruth]]] = {}
    for gi, g in enumerate(ground_truths):
        by_frame_gt.setdefault(g.frame_ref, []).append((gi, g))

    flag_by_det: dict[int, bool] = {}
    gt_matched = [False] * len(ground_truths)
    for frame_ref, dets in by_frame_det.items():
        gts = by_frame_gt.get(frame_ref, [])
        for di, is_tp, gi in _greedy_frame(dets, gts, iou_thr):
            flag_by_det[di] = is_tp
            if is_tp:
                gt_matched[gi] = True

    order = sorted(
        kept_idx, key=lambda i: (-detections[i].confidence, i)
    )
    det_is_tp = [flag_by_det[i] for i in order]
    tp = sum(det_is_tp)
    return MatchResult(
        tp=tp,
        fp=len(order) - tp,
        fn=len(ground_truths) - tp,
        det_is_tp=det_is_tp,
        kept=[detections[i] for i in order],
        gt_matched=gt_matched,
        iou_threshold=iou_thr,
        confidence_threshold=conf_thr,
    )


def precision_recall_f1(match: MatchResult) -> tuple[float, float, float]:
    """Single-point precision, recall and their harmonic mean.

    Vacuous conventions: precision is 1 with no kept predictions, recall
    is 1 with no ground truths, and F1 is 0 when both rates are 0.
    """
    n_pred = match.tp + match.fp
    n_true = match.tp + match.fn
    p = match.tp / n_pred if n_pred else 1.0
    r = match.tp / n_true if n_true else 1.0
    f1 = 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0
    return p, r, f1


def _ranked_flags(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruth],
    iou_thr: float,
) -> tuple[np.ndarray, np.ndarray]:
    """TP flags and confidences for all detections, in descending confidence."""
    match = match_detections(detections, ground_truths, iou_thr=iou_thr, conf_thr=-np.inf)
    conf = np.array([d.confidence for d in match.kept], dtype=np.float64)
    flags = np.array(match.det_is_tp, dtype=bool)
    return conf, flags


def average_precision(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruth],
    iou_thr: float = 0.5,
) -> float:
    """Area under the precision envelope of the all-points PR curve."""
    if not ground_truths:
        raise ValueError("no ground truths present")
    if not detections:
        return 0.0
    _, flags = _ranked_flags(detections, ground_truths, iou_thr)
    cum_tp = np.cumsum(flags)
    ranks = np.arange(1, flags.size + 1)
    recall = cum_tp / len(ground_truths)
    precision = cum_tp / ranks
    # Monotone envelope: precision at recall r becomes max precision at >= r.
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * envelope))


def mean_average_precision(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruth],
    iou_thr: float = 0.5,
) -> tuple[float, dict[int, float]]:
    """AP per class and their mean (single pupil class in practice)."""
    if not ground_truths:
        raise ValueError("no ground truths present")
    classes = sorted({g.class_id for g in ground_truths})
    per_class: dict[int, float] = {}
    for c in classes:
        per_class[c] = average_precision(
            [d for d in detections if d.class_id == c],
            [g for g in ground_truths if g.class_id == c],
            iou_thr=iou_thr,
        )
    return float(np.mean(list(per_class.values()))), per_class


def pr_curve(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruth],
    iou_thr: float = 0.5,
) -> list[tuple[float, float, float]]:
    """(confidence, precision, recall) swept over the detection scores.

    Each point keeps every detection with confidence >= that row's value;
    greedy matching of a confidence-ranked prefix equals the prefix of the
    full ranking, so one pass suffices.
    """
    if not ground_truths:
        raise ValueError("no ground truths present")
    if not detections:
        return []
    conf, flags = _ranked_flags(detections, ground_truths, iou_thr)
    cum_tp = np.cumsum(flags)
    ranks = np.arange(1, flags.size + 1)
    points = []
    n_gt = len(ground_truths)
    for i in range(flags.size):
        # emit one point per distinct confidence (the inclusive prefix)
        if i + 1 < flags.size and conf[i + 1] == conf[i]:
            continue
        points.append((float(conf[i]), float(cum_tp[i] / ranks[i]), float(cum_tp[i] / n_gt)))
    return points


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    ap_per_class: dict[int, float]
    map: float
    tp: int
    fp: int
    fn: int
    iou_threshold: float
    confidence_threshold: float
    n_detections: int = 0
    n_ground_truths: int = 0

    def to_dict(self) -> dict:
        out = dict(vars(self))
        out["ap_per_class"] = {str(k): v for k, v in self.ap_per_class.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())


def evaluate(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruth],
    iou_thr: float = 0.5,
    conf_thr: float = 0.25,
) -> EvalReport:
    """Full report: thresholded P/R/F1 plus threshold-free AP/mAP."""
    match = match_detections(detections, ground_truths, iou_thr=iou_thr, conf_thr=conf_thr)
    p, r, f1 = precision_recall_f1(match)
    map_value, per_class = mean_average_precision(detections, ground_truths, iou_thr=iou_thr)
    return EvalReport(
        precision=p,
        recall=r,
        f1=f1,
        ap_per_class=per_class,
        map=map_value,
        tp=match.tp,
        fp=match.fp,
        fn=match.fn,
        iou_threshold=iou_thr,
        confidence_threshold=conf_thr,
        n_detections=len(detections),
        n_ground_truths=len(ground_truths),
    )


def write_pr_csv(points: Sequence[tuple[float, float, float]], path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("confidence,precision,recall\n")
        for c, p, r in points:
            fh.write(f"{c:.6f},{p:.6f},{r:.6f}\n")

"""Detection metrics: matching, PR curves, 101-point AP, mAP50 / mAP50-95, confusion matrix.

AP values and their means are accumulated as exact rationals and rounded to
float once, so the results are order-independent and ordering relations
between exact quantities (such as mAP50-95 <= mAP50) survive rounding.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .detect import DEFAULT_CONF, iou

IOU_THRESHOLDS = (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)
RECALL_GRID = tuple(k / 100 for k in range(101))


class GroundTruth(NamedTuple):
    image: str
    class_id: int
    box: Tuple[float, float, float, float]


class ImageDetection(NamedTuple):
    image: str
    class_id: int
    score: float
    box: Tuple[float, float, float, float]


class MatchRecord(NamedTuple):
    score: float
    tp: bool
    class_id: int
    order: int  # input position, breaks score ties


@dataclass
class MatchResult:
    records: List[MatchRecord]
    gt_counts: Dict[int, int]

    def for_class(self, class_id: int) -> List[MatchRecord]:
        return sorted((r for r in self.records if r.class_id == class_id), key=lambda r: (-r.score, r.order))


@dataclass
class PRCurve:
    points: List[Tuple[float, float]]  # (recall, precision), score-descending
    gt_count: int
    num_detections: int
    scores: List[float] = field(default_factory=list)


def match_detections(
    dets: Sequence[ImageDetection], gts: Sequence[GroundTruth], iou_threshold: float = 0.5
) -> MatchResult:
    """Greedy one-to-one matching per (image, class).

    Detections are visited by descending score (input order on ties); each
    takes the still-unmatched ground truth with the highest IoU, first in
    input order on ties, provided that IoU reaches ``iou_threshold``.
    """
    if not 0 < iou_threshold <= 1:
        raise ValueError("iou_threshold must be in (0, 1]")
    gt_groups: Dict[Tuple[str, int], List[GroundTruth]] = defaultdict(list)
    gt_counts: Dict[int, int] = defaultdict(int)
    for g in gts:
        gt_groups[(g.image, g.class_id)].append(g)
        gt_counts[g.class_id] += 1
    det_groups: Dict[Tuple[str, int], List[int]] = defaultdict(list)
    for i, d in enumerate(dets):
        det_groups[(d.image, d.class_id)].append(i)

    tp = [False] * len(dets)
    for key, idxs in det_groups.items():
        group_gts = gt_groups.get(key, [])
        used = [False] * len(group_gts)
        for i in sorted(idxs, key=lambda i: (-dets[i].score, i)):
            best, best_iou = -1, -1.0
            for j, g in enumerate(group_gts):
                if used[j]:
                    continue
                o = iou(dets[i].box, g.box)
                if o > best_iou:
                    best, best_iou = j, o
            if best >= 0 and best_iou >= iou_threshold:
                used[best] = True
                tp[i] = True
    records = [MatchRecord(float(d.score), tp[i], d.class_id, i) for i, d in enumerate(dets)]
    return MatchResult(records, dict(gt_counts))


def pr_curve(match: MatchResult, class_id: int) -> PRCurve:
    recs = match.for_class(class_id)
    n_gt = match.gt_counts.get(class_id, 0)
    points = []
    ctp = cfp = 0
    for r in recs:
        if r.tp:
            ctp += 1
        else:
            cfp += 1
        recall = ctp / n_gt if n_gt else 0.0
        points.append((recall, ctp / (ctp + cfp)))
    return PRCurve(points, n_gt, len(recs), [r.score for r in recs])


def _ap_exact(curve: PRCurve) -> Fraction:
    if curve.gt_count == 0:
        return Fraction(0 if curve.num_detections else 1)
    if not curve.points:
        return Fraction(0)
    recall = np.array([p[0] for p in curve.points])
    precision = np.array([p[1] for p in curve.points])
    # envelope[i] = max precision at recall index >= i
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    total = sum(Fraction(float(envelope[i])) for i in idx if i < len(envelope))
    return total / len(RECALL_GRID)


def average_precision(curve: PRCurve) -> float:
    """101-point interpolated AP over the monotone precision envelope.

    With no ground truth the AP is 1 when there are also no detections and 0
    otherwise.
    """
    return float(_ap_exact(curve))


@dataclass
class OperatingPoint:
    precision: float
    recall: float
    f1: float
    confidence: Optional[float]


def max_f1_point(match: MatchResult) -> OperatingPoint:
    """Best F1 over confidence cut-offs of the pooled all-class ranking."""
    total_gt = sum(match.gt_counts.values())
    recs = sorted(match.records, key=lambda r: (-r.score, r.order))
    best = OperatingPoint(0.0, 0.0, 0.0, None)
    ctp = cfp = 0
    for k, r in enumerate(recs):
        ctp += r.tp
        cfp += not r.tp
        if k + 1 < len(recs) and recs[k + 1].score == r.score:
            continue  # a cut-off keeps all tied scores
        p = ctp / (ctp + cfp)
        rc = ctp / total_gt if total_gt else 0.0
        f1 = 2 * p * rc / (p + rc) if p + rc > 0 else 0.0
        if best.confidence is None or f1 > best.f1:
            best = OperatingPoint(p, rc, f1, r.score)
    return best


def confusion_matrix(
    dets: Sequence[ImageDetection],
    gts: Sequence[GroundTruth],
    num_classes: int,
    iou_threshold: float = 0.5,
    conf_threshold: float = DEFAULT_CONF,
) -> np.ndarray:
    """(nc+1) x (nc+1) counts; rows are predicted class, columns actual, last index background.

    Detections with score <= ``conf_threshold`` are ignored.  Pairs with IoU at
    or above the threshold are matched one-to-one by descending IoU, class
    labels ignored.
    """
    bg = num_classes
    m = np.zeros((num_classes + 1, num_classes + 1), dtype=np.int64)
    by_image: Dict[str, Tuple[list, list]] = defaultdict(lambda: ([], []))
    for d in dets:
        if d.score > conf_threshold:
            by_image[d.image][0].append(d)
    for g in gts:
        by_image[g.image][1].append(g)
    for image in sorted(by_image):
        ds, gs = by_image[image]
        pairs = []
        for i, d in enumerate(ds):
            for j, g in enumerate(gs):
                o = iou(d.box, g.box)
                if o >= iou_threshold:
                    pairs.append((-o, i, j))
        pairs.sort()
        used_d, used_g = set(), set()
        for _, i, j in pairs:
            if i in used_d or j in used_g:
                continue
            used_d.add(i)
            used_g.add(j)
            m[ds[i].class_id, gs[j].class_id] += 1
        for i, d in enumerate(ds):
            if i not in used_d:
                m[d.class_id, bg] += 1
        for j, g in enumerate(gs):
            if j not in used_g:
                m[bg, g.class_id] += 1
    return m


@dataclass
class EvalSummary:
    num_classes: int
    status: str  # "ok" or "no ground truth"
    ap50: List[Optional[float]]  # None for classes without ground truth
    ap50_95: List[Optional[float]]
    map50: Optional[float]
    map50_95: Optional[float]
    precision: float
    recall: float
    f1: float
    confidence: Optional[float]
    confusion: np.ndarray
    curves: Dict[int, PRCurve] = field(default_factory=dict)  # per class, IoU 0.5
    gt_counts: Dict[int, int] = field(default_factory=dict)

    def as_dict(self) -> Dict:
        return {
            "status": self.status,
            "num_classes": self.num_classes,
            "map50": self.map50,
            "map50_95": self.map50_95,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "confidence": self.confidence,
            "per_class": [
                {
                    "class_id": c,
                    "gt_count": self.gt_counts.get(c, 0),
                    "ap50": self.ap50[c],
                    "ap50_95": self.ap50_95[c],
                    "pr_curve": [
                        {"score": s, "recall": r, "precision": p}
                        for s, (r, p) in zip(self.curves[c].scores, self.curves[c].points)
                    ]
                    if c in self.curves
                    else [],
                }
                for c in range(self.num_classes)
            ],
            "confusion_matrix": self.confusion.tolist(),
        }


def evaluate(
    dets: Sequence[ImageDetection],
    gts: Sequence[GroundTruth],
    num_classes: int,
    conf_threshold: float = DEFAULT_CONF,
) -> EvalSummary:
    """Per-class AP50 and AP50-95, their class means, and P/R at the max-F1 cut-off.

    Classes without ground truth are left out of the means.  When there is no
    ground truth at all the summary carries ``status="no ground truth"`` and
    ``None`` mAPs.
    """
    per_thr: List[List[Fraction]] = []
    match50 = None
    for thr in IOU_THRESHOLDS:
        match = match_detections(dets, gts, thr)
        if match50 is None:
            match50 = match
        per_thr.append([_ap_exact(pr_curve(match, c)) for c in range(num_classes)])
    gt_counts = match50.gt_counts
    valid = [c for c in range(num_classes) if gt_counts.get(c, 0) > 0]
    exact50 = {c: per_thr[0][c] for c in valid}
    exact5095 = {c: sum(row[c] for row in per_thr) / len(IOU_THRESHOLDS) for c in valid}
    ap50 = [float(exact50[c]) if c in valid else None for c in range(num_classes)]
    ap50_95 = [float(exact5095[c]) if c in valid else None for c in range(num_classes)]
    op = max_f1_point(match50)
    if valid:
        status = "ok"
        map50 = float(sum(exact50.values()) / len(valid))
        map50_95 = float(sum(exact5095.values()) / len(valid))
    else:
        status, map50, map50_95 = "no ground truth", None, None
    return EvalSummary(
        num_classes=num_classes,
        status=status,
        ap50=ap50,
        ap50_95=ap50_95,
        map50=map50,
        map50_95=map50_95,
        precision=op.precision,
        recall=op.recall,
        f1=op.f1,
        confidence=op.confidence,
        confusion=confusion_matrix(dets, gts, num_classes, 0.5, conf_threshold),
        curves={c: pr_curve(match50, c) for c in range(num_classes)},
        gt_counts=dict(gt_counts),
    )

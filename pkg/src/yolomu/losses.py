"""Detection losses: BCE on class logits, CIoU on boxes, DFL on edge distributions.

Scalar losses return ``(loss, gradient)`` with the gradient computed in
closed form.  ``detection_loss`` composes them over an explicit assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .detect import REG_MAX, anchor_arrays, decode_boxes, flatten_maps

_V_SCALE = 4.0 / math.pi**2


class CIoUTerms(NamedTuple):
    iou: float
    center_dist_sq: float
    enclosing_diag_sq: float
    aspect_term: float
    tradeoff: float


@dataclass(frozen=True)
class LossWeights:
    box: float = 7.5
    cls: float = 0.5
    dfl: float = 1.5

    def __post_init__(self):
        if min(self.box, self.cls, self.dfl) < 0:
            raise ValueError("loss weights must be non-negative")


def bce_with_logits(logit: float, target: float) -> Tuple[float, float]:
    """Binary cross-entropy on a logit, in the overflow-free form."""
    if not 0.0 <= target <= 1.0:
        raise ValueError(f"target {target} outside [0, 1]")
    z = float(logit)
    loss = max(z, 0.0) - z * target + math.log1p(math.exp(-abs(z)))
    if z >= 0:
        sig = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        sig = e / (1.0 + e)
    return loss, sig - target


def ciou_loss(pred: Sequence[float], gt: Sequence[float], alpha: Optional[float] = None):
    """Complete-IoU loss of ``pred`` against ``gt`` (both x1, y1, x2, y2).

    loss = 1 - IoU + rho^2 / c^2 + alpha * v.  The trade-off ``alpha`` is held
    constant when differentiating; pass ``alpha`` to pin it explicitly.

    Returns:
        (loss, gradient wrt the four pred corners as an array, CIoUTerms)
    """
    x1, y1, x2, y2 = (float(v) for v in pred)
    gx1, gy1, gx2, gy2 = (float(v) for v in gt)
    w, h = x2 - x1, y2 - y1
    gw, gh = gx2 - gx1, gy2 - gy1
    if w <= 0 or h <= 0 or gw <= 0 or gh <= 0:
        raise ValueError("ciou_loss needs boxes with positive width and height")

    # intersection; d(iw)/d(pred corner) follows which side of each min/max is active
    ix1, ix2 = max(x1, gx1), min(x2, gx2)
    iy1, iy2 = max(y1, gy1), min(y2, gy2)
    iw, ih = ix2 - ix1, iy2 - iy1
    overlap = iw > 0 and ih > 0
    inter = iw * ih if overlap else 0.0
    if overlap:
        d_iw = np.array([-(x1 > gx1), 0.0, float(x2 < gx2), 0.0], dtype=np.float64)
        d_ih = np.array([0.0, -(y1 > gy1), 0.0, float(y2 < gy2)], dtype=np.float64)
        d_inter = d_iw * ih + d_ih * iw
    else:
        d_inter = np.zeros(4)
    area = w * h
    d_area = np.array([-h, -w, h, w])
    union = area + gw * gh - inter
    d_union = d_area - d_inter
    iou = inter / union
    d_iou = (d_inter * union - inter * d_union) / union**2

    dx = (x1 + x2 - gx1 - gx2) / 2
    dy = (y1 + y2 - gy1 - gy2) / 2
    rho2 = dx * dx + dy * dy
    d_rho2 = np.array([dx, dy, dx, dy])

    cw = max(x2, gx2) - min(x1, gx1)
    ch = max(y2, gy2) - min(y1, gy1)
    c2 = cw * cw + ch * ch
    d_c2 = 2 * np.array([-cw * (x1 < gx1), -ch * (y1 < gy1), cw * (x2 > gx2), ch * (y2 > gy2)])

    diff = math.atan(gw / gh) - math.atan(w / h)
    v = _V_SCALE * diff * diff
    # d atan(w/h) = (h dw - w dh) / (w^2 + h^2)
    d_atan = np.array([-h, w, h, -w]) / (w * w + h * h)
    d_v = -2 * _V_SCALE * diff * d_atan
    if alpha is None:
        denom = (1 - iou) + v
        alpha = v / denom if denom > 0 else 0.0

    loss = 1 - iou + rho2 / c2 + alpha * v
    grad = -d_iou + (d_rho2 * c2 - rho2 * d_c2) / c2**2 + alpha * d_v
    return loss, grad, CIoUTerms(iou, rho2, c2, v, alpha)


def dfl_loss(bin_logits: Sequence[float], target: float) -> Tuple[float, np.ndarray]:
    """Cross-entropy against the two bins bracketing a continuous target."""
    z = np.asarray(bin_logits, dtype=np.float64)
    n = z.shape[-1]
    if z.shape != (n,) or n != REG_MAX:
        raise ValueError(f"expected {REG_MAX} logits, got shape {z.shape}")
    if not 0.0 <= target <= n - 1:
        raise ValueError(f"target {target} outside [0, {n - 1}]")
    shifted = z - z.max()
    log_s = shifted - math.log(np.exp(shifted).sum())
    left = int(math.floor(target))
    wr = target - left
    soft_target = np.zeros(n)
    soft_target[left] = 1.0 - wr
    if wr > 0:
        soft_target[left + 1] = wr
    loss = -float(soft_target @ log_s)
    return loss, np.exp(log_s) - soft_target


# ---------------------------------------------------------------------------
# combined loss


class Assignment(NamedTuple):
    index: int
    box: Tuple[float, float, float, float]
    class_id: int


def assign_targets_center(
    gt_boxes: Sequence[Sequence[float]],
    gt_classes: Sequence[int],
    level_shapes: Sequence[Tuple[int, int]],
    strides: Sequence[int] = (8, 16, 32),
    size_limits: Sequence[float] = (64, 128),
) -> List[Assignment]:
    """Give each ground-truth box to the cell containing its center.

    The level is picked by max(w, h): below ``size_limits[0]`` pixels goes to
    the first stride, below ``size_limits[1]`` to the second, else the last.
    """
    if len(level_shapes) != len(strides) or len(size_limits) != len(strides) - 1:
        raise ValueError("level_shapes, strides and size_limits disagree")
    offsets = np.concatenate([[0], np.cumsum([h * w for h, w in level_shapes])])
    img_h = level_shapes[0][0] * strides[0]
    img_w = level_shapes[0][1] * strides[0]
    out = []
    for box, cls in zip(gt_boxes, gt_classes):
        x1, y1, x2, y2 = (float(v) for v in box)
        cx, cy = (x1 + x2) / 2, (y1 + y2) / 2
        if not (0 <= cx < img_w and 0 <= cy < img_h):
            raise ValueError(f"ground-truth center ({cx}, {cy}) outside the {img_w}x{img_h} image")
        size = max(x2 - x1, y2 - y1)
        lvl = next((i for i, lim in enumerate(size_limits) if size < lim), len(strides) - 1)
        h, w = level_shapes[lvl]
        row = min(int(cy // strides[lvl]), h - 1)
        col = min(int(cx // strides[lvl]), w - 1)
        out.append(Assignment(int(offsets[lvl]) + row * w + col, (x1, y1, x2, y2), int(cls)))
    return out


@dataclass
class FlatPredictions:
    """Per-cell predictions flattened across levels."""

    box_logits: np.ndarray  # (N, 4, reg_max)
    cls_logits: np.ndarray  # (N, nc)
    centers: np.ndarray  # (N, 2) grid units
    strides: np.ndarray  # (N,)

    @classmethod
    def from_maps(cls, maps, num_classes: int, strides=(8, 16, 32)) -> "FlatPredictions":
        flat, shapes = flatten_maps(maps)
        if flat.shape[1] != 4 * REG_MAX + num_classes:
            raise ValueError("map channel count does not match num_classes")
        centers, st = anchor_arrays(shapes, strides)
        return cls(flat[:, : 4 * REG_MAX].reshape(-1, 4, REG_MAX), flat[:, 4 * REG_MAX :], centers, st)

    def boxes(self, index) -> np.ndarray:
        idx = np.atleast_1d(index)
        return decode_boxes(self.box_logits[idx].reshape(len(idx), -1), self.centers[idx], self.strides[idx])


def detection_loss(
    preds: FlatPredictions,
    assignments: Sequence[Assignment],
    num_classes: int,
    weights: LossWeights = LossWeights(),
) -> Tuple[float, float, float, float]:
    """Weighted sum of mean CIoU, mean BCE over all (cell, class) slots and mean DFL.

    Returns:
        (total, box_part, cls_part, dfl_part)
    """
    n = preds.cls_logits.shape[0]
    if preds.cls_logits.shape[1] != num_classes:
        raise ValueError("class logits do not match num_classes")
    targets = np.zeros((n, num_classes))
    box_terms, dfl_terms = [], []
    for a in assignments:
        if not 0 <= a.index < n or not 0 <= a.class_id < num_classes:
            raise ValueError(f"invalid assignment {a}")
        targets[a.index, a.class_id] = 1.0
        pred_box = preds.boxes(a.index)[0]
        box_terms.append(ciou_loss(pred_box, a.box)[0])
        s = preds.strides[a.index]
        cx, cy = preds.centers[a.index]
        x1, y1, x2, y2 = (v / s for v in a.box)
        for side, dist in enumerate((cx - x1, cy - y1, x2 - cx, y2 - cy)):
            dist = min(max(dist, 0.0), REG_MAX - 1 - 0.01)
            dfl_terms.append(dfl_loss(preds.box_logits[a.index, side], dist)[0])

    z = preds.cls_logits.astype(np.float64)
    bce = np.maximum(z, 0) - z * targets + np.log1p(np.exp(-np.abs(z)))
    cls_part = float(bce.mean())
    box_part = math.fsum(box_terms) / len(box_terms) if box_terms else 0.0
    dfl_part = math.fsum(dfl_terms) / len(dfl_terms) if dfl_terms else 0.0
    total = weights.box * box_part + weights.cls * cls_part + weights.dfl * dfl_part
    return total, box_part, cls_part, dfl_part

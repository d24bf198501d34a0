"""Decoding raw head outputs into pixel-space detections, plus IoU and NMS."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .tensor import sigmoid

REG_MAX = 16
DEFAULT_CONF = 0.25
DEFAULT_IOU = 0.45


class Box(NamedTuple):
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return max(self.x2 - self.x1, 0.0) * max(self.y2 - self.y1, 0.0)


@dataclass(frozen=True)
class Detection:
    box: Box
    class_id: int
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


class AnchorPoint(NamedTuple):
    cx: float
    cy: float
    stride: int


def make_anchor_points(level_shapes: Sequence[Tuple[int, int]], strides: Sequence[int] = (8, 16, 32)) -> List[AnchorPoint]:
    """Grid-cell centers (in grid units) for every level, row-major."""
    if len(level_shapes) != len(strides):
        raise ValueError(f"{len(level_shapes)} level shapes for {len(strides)} strides")
    points = []
    for (h, w), s in zip(level_shapes, strides):
        for i in range(h):
            for j in range(w):
                points.append(AnchorPoint(j + 0.5, i + 0.5, s))
    return points


def anchor_arrays(level_shapes, strides=(8, 16, 32)) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized anchors: (N, 2) centers in grid units and (N,) strides."""
    if len(level_shapes) != len(strides):
        raise ValueError(f"{len(level_shapes)} level shapes for {len(strides)} strides")
    centers, st = [], []
    for (h, w), s in zip(level_shapes, strides):
        ys, xs = np.meshgrid(np.arange(h) + 0.5, np.arange(w) + 0.5, indexing="ij")
        centers.append(np.stack([xs.ravel(), ys.ravel()], axis=1))
        st.append(np.full(h * w, s, dtype=np.float64))
    return np.concatenate(centers), np.concatenate(st)


def dfl_expectation(bin_logits) -> np.ndarray:
    """Expected bin index under softmax over the last axis (length reg_max)."""
    logits = np.asarray(bin_logits, dtype=np.float64)
    if logits.shape[-1] != REG_MAX:
        raise ValueError(f"expected {REG_MAX} bins, got {logits.shape[-1]}")
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    d = (e @ np.arange(REG_MAX, dtype=np.float64)) / e.sum(axis=-1)
    return d if d.ndim else float(d)


def flatten_maps(maps: Sequence[np.ndarray]) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """Stack (1, C, H, W) maps into an (N, C) array of per-cell predictions."""
    flat, shapes = [], []
    for m in maps:
        m = np.asarray(m)
        if m.ndim == 4:
            if m.shape[0] != 1:
                raise ValueError("only batch size 1 is supported")
            m = m[0]
        c, h, w = m.shape
        flat.append(m.reshape(c, h * w).T)
        shapes.append((h, w))
    return np.concatenate(flat).astype(np.float64), shapes


def decode_boxes(box_logits: np.ndarray, centers: np.ndarray, strides: np.ndarray) -> np.ndarray:
    """(N, 4*reg_max) logits -> (N, 4) pixel boxes (x1, y1, x2, y2)."""
    d = dfl_expectation(box_logits.reshape(-1, 4, REG_MAX))
    lt = centers - d[:, :2]
    rb = centers + d[:, 2:]
    return np.concatenate([lt, rb], axis=1) * strides[:, None]


def decode_predictions(
    maps: Sequence[np.ndarray],
    num_classes: int,
    conf_threshold: float = DEFAULT_CONF,
    strides: Sequence[int] = (8, 16, 32),
    image_size: Optional[Tuple[int, int]] = None,
) -> List[Detection]:
    """Turn raw maps into one candidate per (cell, class) whose score exceeds the threshold.

    Args:
        maps: per-level arrays of shape (1, 64 + nc, H, W).
        num_classes: class-branch width.
        conf_threshold: strict lower bound on sigmoid class score.
        strides: pixel stride of each level.
        image_size: (width, height); if given, boxes are clipped to it.
    """
    if not 0.0 <= conf_threshold <= 1.0:
        raise ValueError("conf_threshold must be in [0, 1]")
    preds, shapes = flatten_maps(maps)
    if preds.shape[1] != 4 * REG_MAX + num_classes:
        raise ValueError(f"maps have {preds.shape[1]} channels, expected {4 * REG_MAX + num_classes}")
    centers, st = anchor_arrays(shapes, strides)
    scores = sigmoid(preds[:, 4 * REG_MAX :]).astype(np.float64)
    cells, classes = np.nonzero(scores > conf_threshold)
    if cells.size == 0:
        return []
    boxes = decode_boxes(preds[cells, : 4 * REG_MAX], centers[cells], st[cells])
    if image_size is not None:
        w, h = image_size
        boxes[:, [0, 2]] = boxes[:, [0, 2]].clip(0, w)
        boxes[:, [1, 3]] = boxes[:, [1, 3]].clip(0, h)
    return [
        Detection(Box(*map(float, b)), int(c), float(s))
        for b, c, s in zip(boxes, classes, scores[cells, classes])
    ]


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    """Intersection over union of two (x1, y1, x2, y2) boxes; 0 for empty unions."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def _iou_one_to_many(box: np.ndarray, others: np.ndarray) -> np.ndarray:
    iw = np.minimum(box[2], others[:, 2]) - np.maximum(box[0], others[:, 0])
    ih = np.minimum(box[3], others[:, 3]) - np.maximum(box[1], others[:, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = (box[2] - box[0]) * (box[3] - box[1]) + (others[:, 2] - others[:, 0]) * (others[:, 3] - others[:, 1]) - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def nms_order(candidates: Sequence[Detection]) -> List[int]:
    """Processing order: score descending, then class id, then input position."""
    return sorted(range(len(candidates)), key=lambda i: (-candidates[i].score, candidates[i].class_id, i))


def nms(candidates: Sequence[Detection], iou_threshold: float = DEFAULT_IOU) -> List[Detection]:
    """Class-aware greedy non-maximum suppression.

    A candidate survives iff its IoU with every already-kept candidate of the
    same class is <= ``iou_threshold``.  Output is in processing order.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must be in [0, 1]")
    order = nms_order(candidates)
    if not order:
        return []
    boxes = np.array([candidates[i].box for i in order], dtype=np.float64)
    classes = np.array([candidates[i].class_id for i in order])
    alive = np.ones(len(order), dtype=bool)
    keep = []
    for k in range(len(order)):
        if not alive[k]:
            continue
        keep.append(order[k])
        rest = np.nonzero(alive[k + 1 :] & (classes[k + 1 :] == classes[k]))[0] + k + 1
        if rest.size:
            overlap = _iou_one_to_many(boxes[k], boxes[rest])
            alive[rest[overlap > iou_threshold]] = False
    return [candidates[i] for i in keep]

"""YOLO text annotations, class files, manifests and splitting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .detect import Box

log = logging.getLogger(__name__)

DEFAULT_CLASSES = (
    "Laptop",
    "Occupant State - Abnormal",
    "Occupant State - Sitting",
    "Occupant State - Walking",
)
CLAMP_EPS = 1e-3


class LabelError(ValueError):
    """A malformed annotation; ``line`` is 1-based or None."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        if path is not None:
            where = f"{path}:{line}" if line is not None else str(path)
        else:
            where = f"line {line}" if line is not None else ""
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path


class Annotation(NamedTuple):
    class_id: int
    cx: float
    cy: float
    w: float
    h: float


@dataclass(frozen=True)
class ClassMap:
    names: Tuple[str, ...] = DEFAULT_CLASSES

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")
        if not self.names:
            raise ValueError("class map is empty")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @classmethod
    def from_file(cls, path) -> "ClassMap":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tuple(line.strip() for line in lines if line.strip()))

    def to_text(self) -> str:
        return "".join(f"{n}\n" for n in self.names)


def _clamp_unit(value: float, what: str, lineno: int) -> float:
    if -CLAMP_EPS <= value < 0 or 1 < value <= 1 + CLAMP_EPS:
        log.warning("line %d: %s=%g clamped to [0, 1]", lineno, what, value)
        return min(max(value, 0.0), 1.0)
    if not 0 <= value <= 1:
        raise LabelError(f"{what}={value:g} outside [0, 1]", lineno)
    return value


def parse_label_file(text: str, num_classes: Optional[int] = None) -> List[Annotation]:
    """Parse ``class cx cy w h`` lines; blank lines are skipped."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split()
        if not fields:
            continue
        if len(fields) != 5:
            raise LabelError(f"expected 5 fields, got {len(fields)}", lineno)
        try:
            cls_f = float(fields[0])
            values = [float(v) for v in fields[1:]]
        except ValueError:
            raise LabelError(f"non-numeric field in {raw.strip()!r}", lineno) from None
        if not all(math.isfinite(v) for v in values) or cls_f != int(cls_f) or cls_f < 0:
            raise LabelError(f"invalid values in {raw.strip()!r}", lineno)
        cls = int(cls_f)
        if num_classes is not None and cls >= num_classes:
            raise LabelError(f"class id {cls} out of range for {num_classes} classes", lineno)
        cx, cy, w, h = (_clamp_unit(v, n, lineno) for v, n in zip(values, ("cx", "cy", "w", "h")))
        # keep the box inside the frame
        x1, x2 = cx - w / 2, cx + w / 2
        y1, y2 = cy - h / 2, cy + h / 2
        if min(x1, y1) < -CLAMP_EPS or max(x2, y2) > 1 + CLAMP_EPS:
            raise LabelError("box extends outside the image", lineno)
        if min(x1, y1) < 0 or max(x2, y2) > 1:
            log.warning("line %d: box extent clamped to the image", lineno)
            x1, y1, x2, y2 = max(x1, 0.0), max(y1, 0.0), min(x2, 1.0), min(y2, 1.0)
            cx, cy, w, h = (x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1
        out.append(Annotation(cls, cx, cy, w, h))
    return out


def read_label_file(path, num_classes: Optional[int] = None) -> List[Annotation]:
    try:
        return parse_label_file(Path(path).read_text(encoding="utf-8"), num_classes)
    except LabelError as exc:
        raise LabelError(str(exc).split(": ", 1)[-1], exc.line, str(path)) from None


def write_label_file(annotations: Sequence[Sequence[float]]) -> str:
    return "".join(
        f"{int(a[0])} {a[1]:.6f} {a[2]:.6f} {a[3]:.6f} {a[4]:.6f}\n" for a in annotations
    )


def norm_to_pixel(box: Sequence[float], img_w: float, img_h: float) -> Box:
    """(cx, cy, w, h) normalized -> pixel corners."""
    if img_w <= 0 or img_h <= 0:
        raise ValueError("image dimensions must be positive")
    cx, cy, w, h = box
    return Box((cx - w / 2) * img_w, (cy - h / 2) * img_h, (cx + w / 2) * img_w, (cy + h / 2) * img_h)


def pixel_to_norm(box: Sequence[float], img_w: float, img_h: float) -> Tuple[float, float, float, float]:
    if img_w <= 0 or img_h <= 0:
        raise ValueError("image dimensions must be positive")
    x1, y1, x2, y2 = box
    return ((x1 + x2) / 2 / img_w, (y1 + y2) / 2 / img_h, (x2 - x1) / img_w, (y2 - y1) / img_h)


def split_dataset(items: Sequence, ratio: float = 0.8, seed: int = 0) -> Tuple[list, list]:
    """Seeded shuffle, then the first round(ratio * N) items go to train."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    if len(items) == 0:
        raise ValueError("cannot split an empty dataset")
    order = np.random.default_rng(seed).permutation(len(items))
    shuffled = [items[i] for i in order]
    n_train = round(ratio * len(items))
    return shuffled[:n_train], shuffled[n_train:]


@dataclass
class ManifestEntry:
    image: str  # as written in the manifest; used as the image id
    label: str
    image_path: Path = field(repr=False, default=None)
    label_path: Path = field(repr=False, default=None)


def read_manifest(path) -> List[ManifestEntry]:
    """Tab-separated ``image<TAB>label`` lines; relative paths resolve against the manifest."""
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise LabelError("manifest line needs image<TAB>label", lineno, str(path))
        img, lbl = (p.strip() for p in parts)
        entries.append(ManifestEntry(img, lbl, base / img, base / lbl))
    return entries


def write_manifest(path, pairs: Sequence[Tuple[str, str]]) -> None:
    Path(path).write_text("".join(f"{i}\t{l}\n" for i, l in pairs), encoding="utf-8")

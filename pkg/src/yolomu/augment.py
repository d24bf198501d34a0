"""Colour and resize augmentation for 8-bit RGB frames.

Images are ``uint8`` arrays of shape (height, width, 3).  Boxes are
normalized (class-free) ``(cx, cy, w, h)`` rows.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class AugmentConfig:
    target_size: int = 640
    gray_probability: float = 0.15
    hue_limit: float = 0.10  # fraction of the full 360 degree wheel
    sat_limit: float = 0.25
    bright_limit: float = 0.05
    master_seed: int = 0
    sampling: str = "uniform"  # or "endpoints": pick +-limit with equal odds
    letterbox: bool = False
    pad_value: int = 114

    def __post_init__(self):
        if not 0.0 <= self.gray_probability <= 1.0:
            raise ValueError("gray_probability must be in [0, 1]")
        if min(self.hue_limit, self.sat_limit, self.bright_limit) < 0:
            raise ValueError("augmentation limits must be non-negative")
        if self.sampling not in ("uniform", "endpoints"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.target_size < 1:
            raise ValueError("target_size must be >= 1")


def _check_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected a (H, W, 3) uint8 image, got {img.shape} {img.dtype}")
    return img


def _to_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def _sample_coords(n_in: int, n_out: int):
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(img, out_w: int, out_h: int) -> np.ndarray:
    """Half-pixel-centred bilinear resize, rounded half-to-even."""
    img = _check_image(img)
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be >= 1")
    h, w, _ = img.shape
    y0, y1, fy = _sample_coords(h, out_h)
    x0, x1, fx = _sample_coords(w, out_w)
    f = img.astype(np.float64)
    rows = f[y0] * (1 - fy)[:, None, None] + f[y1] * fy[:, None, None]
    out = rows[:, x0] * (1 - fx)[None, :, None] + rows[:, x1] * fx[None, :, None]
    return _to_u8(out)


def letterbox(img, size: int, pad_value: int = 114) -> Tuple[np.ndarray, float, Tuple[int, int]]:
    """Aspect-preserving resize into a square canvas.

    Returns the canvas, the scale factor and the (left, top) padding.
    """
    img = _check_image(img)
    h, w, _ = img.shape
    scale = min(size / w, size / h)
    nw, nh = max(1, round(w * scale)), max(1, round(h * scale))
    left, top = (size - nw) // 2, (size - nh) // 2
    canvas = np.full((size, size, 3), pad_value, dtype=np.uint8)
    canvas[top : top + nh, left : left + nw] = resize_bilinear(img, nw, nh)
    return canvas, scale, (left, top)


# ---------------------------------------------------------------------------
# HSV


def rgb_to_hsv(rgb) -> np.ndarray:
    """Hexcone conversion. Hue in degrees [0, 360), saturation and value in [0, 1].

    Accepts any array whose last axis is (r, g, b) bytes.  Achromatic pixels
    get hue 0.
    """
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    mx = c.max(axis=-1)
    mn = c.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        mx == r,
        ((g - b) / safe) % 6.0,
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta > 0, h * 60.0, 0.0) % 360.0
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([h, s, mx], axis=-1)


def hsv_to_rgb_float(hsv) -> np.ndarray:
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0] % 360.0, hsv[..., 1], hsv[..., 2]
    hp = h / 60.0
    sector = np.floor(hp).astype(np.int64) % 6
    f = hp - np.floor(hp)
    p = v * (1 - s)
    q = v * (1 - s * f)
    t = v * (1 - s * (1 - f))
    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    r = np.choose(sector, choices_r)
    g = np.choose(sector, choices_g)
    b = np.choose(sector, choices_b)
    return np.stack([r, g, b], axis=-1) * 255.0


def hsv_to_rgb(hsv) -> np.ndarray:
    """Inverse of :func:`rgb_to_hsv`, rounded to bytes."""
    return _to_u8(hsv_to_rgb_float(hsv))


def _jitter_hsv(img: np.ndarray, hue_offset: float = 0.0, sat_scale: float = 1.0, bright_scale: float = 1.0) -> np.ndarray:
    hsv = rgb_to_hsv(img)
    hsv[..., 0] = (hsv[..., 0] + hue_offset * 360.0) % 360.0
    hsv[..., 1] = np.clip(hsv[..., 1] * sat_scale, 0.0, 1.0)
    hsv[..., 2] = np.clip(hsv[..., 2] * bright_scale, 0.0, 1.0)
    return hsv_to_rgb(hsv)


def adjust_hue(img, offset_fraction: float) -> np.ndarray:
    """Rotate hue by ``offset_fraction`` of the full wheel."""
    return _jitter_hsv(_check_image(img), hue_offset=offset_fraction)


def adjust_saturation(img, scale: float) -> np.ndarray:
    return _jitter_hsv(_check_image(img), sat_scale=scale)


def adjust_brightness(img, scale: float) -> np.ndarray:
    return _jitter_hsv(_check_image(img), bright_scale=scale)


LUMA = (0.299, 0.587, 0.114)


def to_grayscale(img) -> np.ndarray:
    """Rec.601 luma replicated to all three channels."""
    img = _check_image(img).astype(np.float64)
    luma = img[..., 0] * LUMA[0] + img[..., 1] * LUMA[1] + img[..., 2] * LUMA[2]
    return np.repeat(_to_u8(luma)[..., None], 3, axis=2)


# ---------------------------------------------------------------------------
# pipeline


def sample_params(config: AugmentConfig, sample_index: int) -> Dict[str, float]:
    """Draw the augmentation parameters for one sample.

    All four draws happen for every sample, so the stream for a given
    (master_seed, sample_index) never depends on which ops end up active.
    """
    rng = np.random.default_rng([config.master_seed, sample_index])
    u_gray, u_hue, u_sat, u_bright = rng.random(4)

    def draw(u: float, limit: float) -> float:
        if config.sampling == "endpoints":
            return limit if u >= 0.5 else -limit
        return (2.0 * u - 1.0) * limit

    return {
        "grayscale": bool(u_gray < config.gray_probability),
        "hue_offset": draw(u_hue, config.hue_limit),
        "sat_scale": 1.0 + draw(u_sat, config.sat_limit),
        "bright_scale": 1.0 + draw(u_bright, config.bright_limit),
    }


def augment_sample(img, boxes, config: AugmentConfig, sample_index: int, params: Optional[Dict] = None):
    """Resize, maybe grayscale, then hue / saturation / brightness jitter.

    Args:
        img: (H, W, 3) uint8 frame.
        boxes: (N, 4) normalized (cx, cy, w, h); returned unchanged unless
            letterboxing is enabled.
        config: augmentation settings.
        sample_index: selects the per-sample random stream.
        params: pre-drawn parameters (see :func:`sample_params`).

    Returns:
        (augmented image, boxes)
    """
    img = _check_image(img)
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if boxes.size and (boxes.min() < 0 or boxes.max() > 1):
        raise ValueError("boxes must be normalized to [0, 1]")
    if params is None:
        params = sample_params(config, sample_index)

    size = config.target_size
    if config.letterbox:
        h, w, _ = img.shape
        out, scale, (left, top) = letterbox(img, size, config.pad_value)
        nw, nh = max(1, round(w * scale)), max(1, round(h * scale))
        boxes = boxes.copy()
        boxes[:, 0] = (boxes[:, 0] * nw + left) / size
        boxes[:, 1] = (boxes[:, 1] * nh + top) / size
        boxes[:, 2] *= nw / size
        boxes[:, 3] *= nh / size
    else:
        out = resize_bilinear(img, size, size)

    if params["grayscale"]:
        out = to_grayscale(out)
    if (params["hue_offset"], params["sat_scale"], params["bright_scale"]) != (0.0, 1.0, 1.0):
        out = _jitter_hsv(out, params["hue_offset"], params["sat_scale"], params["bright_scale"])
    return out, boxes


def config_dict(config: AugmentConfig) -> Dict:
    return asdict(config)

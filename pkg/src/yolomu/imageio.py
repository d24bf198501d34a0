"""Binary PPM (P6) reading and writing; other formats go through Pillow when installed."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

_HEADER_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


class ImageFormatError(ValueError):
    pass


def decode_ppm(data: bytes) -> np.ndarray:
    pos = 0
    tokens = []
    for _ in range(4):
        m = _HEADER_TOKEN.match(data, pos)
        if m is None:
            raise ImageFormatError("truncated PPM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P6":
        raise ImageFormatError(f"not a binary PPM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError("non-numeric PPM header field") from exc
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 is supported, got {maxval}")
    pos += 1  # single whitespace byte before the raster
    raster = data[pos : pos + w * h * 3]
    if len(raster) != w * h * 3:
        raise ImageFormatError("truncated PPM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3).copy()


def encode_ppm(img: np.ndarray) -> bytes:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + img.tobytes()


def read_image(path) -> np.ndarray:
    """Load an RGB image as a (H, W, 3) uint8 array."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return decode_ppm(path.read_bytes())
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise ImageFormatError(
            f"{path.suffix} needs Pillow; install it or convert to PPM (e.g. `convert in.png out.ppm`)"
        ) from exc
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, img: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        path.write_bytes(encode_ppm(img))
        return
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ImageFormatError(f"{path.suffix} needs Pillow; write .ppm instead") from exc
    Image.fromarray(np.asarray(img, dtype=np.uint8)).save(path)

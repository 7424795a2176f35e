"""Layer-wise crop extraction for scoring.

Each object mask's tight bounding box is cropped out of the rendered image
and bilinear-resized to 224x224 so all layers are scored at one resolution.
The resize convention is fixed (half-pixel centers, clamped edges, round half
up) so results are reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatchError
from ..masks import Mask
from ..session import RgbImage

CROP_SIZE = 224


def bilinear_resize(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an (H, W, C) uint8 array."""
    in_h, in_w = pixels.shape[:2]
    if in_h == out_h and in_w == out_w:
        return pixels.copy()
    src = pixels.astype(np.float64)
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return np.floor(out + 0.5).astype(np.uint8)


def mask_bbox(mask: Mask) -> tuple[int, int, int, int] | None:
    """(y0, x0, y1, x1) inclusive bounds of set cells; None when empty."""
    if mask.is_empty():
        return None
    rows = np.flatnonzero(mask.bits.any(axis=1))
    cols = np.flatnonzero(mask.bits.any(axis=0))
    return int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1])


def crop_layers(
    image: RgbImage, masks: list[Mask], size: int = CROP_SIZE
) -> tuple[list[tuple[int, RgbImage]], list[str]]:
    """Crop each mask's bounding box and resize to size x size.

    Returns (crops, notices); empty masks are skipped with a notice instead
    of failing the whole evaluation.
    """
    crops: list[tuple[int, RgbImage]] = []
    notices: list[str] = []
    for index, mask in enumerate(masks):
        if mask.shape != (image.height, image.width):
            raise DimensionMismatchError(
                f"mask {mask.shape} does not match image ({image.height}, {image.width})"
            )
        bbox = mask_bbox(mask)
        if bbox is None:
            notices.append(f"layer {index}: empty mask, crop skipped")
            continue
        y0, x0, y1, x1 = bbox
        window = image.pixels[y0 : y1 + 1, x0 : x1 + 1]
        crops.append((index, RgbImage(bilinear_resize(window, size, size))))
    return crops, notices

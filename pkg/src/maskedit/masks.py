"""Binary mask algebra on the latent grid.

Masks are hard (no feathering) boolean rasters. They carry two jobs: region
ownership for attention routing and the blend selector for background
preservation. All operations are pure functions on immutable inputs, so they
are safe to call concurrently.

Conventions fixed here:
  * rectangle specs are inclusive cell ranges, clamped to the canvas;
  * polygons set cells whose center lies strictly inside (even-odd rule);
  * downsampling sets a latent cell iff >= 50% of its image cells are set
    (ties set);
  * the wire form is run-length encoding over the row-major bit string,
    starting with the length of the leading zero run.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import (
    DegenerateMaskError,
    DimensionMismatchError,
    LayerLookupError,
    UndefinedRatioError,
)


@dataclass(frozen=True, eq=False)
class Mask:
    """Boolean raster over a grid; ``bits`` has shape (height, width)."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.ascontiguousarray(np.asarray(self.bits, dtype=bool))
        if bits.ndim != 2:
            raise DimensionMismatchError(f"mask bits must be 2-D, got shape {bits.shape}")
        if bits.shape[0] < 1 or bits.shape[1] < 1:
            raise DimensionMismatchError(f"mask dims must be positive, got {bits.shape}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def count(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()

    def is_full(self) -> bool:
        return bool(self.bits.all())

    @classmethod
    def all_ones(cls, height: int, width: int) -> "Mask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def all_zeros(cls, height: int, width: int) -> "Mask":
        return cls(np.zeros((height, width), dtype=bool))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    def union(self, other: "Mask") -> "Mask":
        self._check_same_shape(other)
        return Mask(self.bits | other.bits)

    def intersect(self, other: "Mask") -> "Mask":
        self._check_same_shape(other)
        return Mask(self.bits & other.bits)

    def subtract(self, other: "Mask") -> "Mask":
        """Set difference: cells in self not covered by other (never negative)."""
        self._check_same_shape(other)
        return Mask(self.bits & ~other.bits)

    def complement(self) -> "Mask":
        return Mask(~self.bits)

    def _check_same_shape(self, other: "Mask") -> None:
        if self.shape != other.shape:
            raise DimensionMismatchError(
                f"mask shape mismatch: {self.shape} vs {other.shape}"
            )

    # -- wire forms ------------------------------------------------------------

    def to_rle(self) -> dict:
        """Run lengths over the row-major bit string, leading zero run first."""
        flat = self.bits.ravel()
        changes = np.flatnonzero(np.diff(flat.astype(np.int8)))
        bounds = np.concatenate(([0], changes + 1, [flat.size]))
        runs = np.diff(bounds).tolist()
        if flat[0]:
            runs = [0] + runs
        return {"width": self.width, "height": self.height, "runs": runs}

    @classmethod
    def from_rle(cls, payload: dict) -> "Mask":
        width = int(payload["width"])
        height = int(payload["height"])
        runs = [int(r) for r in payload["runs"]]
        if any(r < 0 for r in runs):
            raise DimensionMismatchError("negative run length in mask payload")
        if sum(runs) != width * height:
            raise DimensionMismatchError(
                f"run lengths sum to {sum(runs)}, expected {width * height}"
            )
        flat = np.zeros(width * height, dtype=bool)
        pos = 0
        value = False
        for run in runs:
            if value:
                flat[pos : pos + run] = True
            pos += run
            value = not value
        return cls(flat.reshape(height, width))

    def to_png_bytes(self) -> bytes:
        img = Image.fromarray(self.bits.astype(np.uint8) * 255, mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_image_bytes(cls, data: bytes) -> "Mask":
        """Decode a lossless raster upload; any nonzero sample is a set bit."""
        img = Image.open(io.BytesIO(data))
        arr = np.asarray(img.convert("L"))
        return cls(arr > 0)


@dataclass
class RegionPartition:
    """Disjoint exclusive regions with owner layer indices, covering the grid.

    Entry order is fixed: current layer first, then prior layers in descending
    index, background (owner 0) last. Token indices are precomputed because
    the attention path walks the partition many times per edit.
    """

    entries: tuple[tuple[int, Mask], ...]
    current_index: int

    def __post_init__(self):
        self.entries = tuple((int(j), m) for j, m in self.entries)
        shapes = {m.shape for _, m in self.entries}
        if len(shapes) != 1:
            raise DimensionMismatchError(f"partition regions disagree on shape: {shapes}")
        self._token_indices = tuple(
            np.flatnonzero(m.bits.ravel()) for _, m in self.entries
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries[0][1].shape

    @property
    def owners(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self.entries)

    def token_indices(self, position: int) -> np.ndarray:
        """Flat (row-major) cell indices of the region at entry ``position``."""
        return self._token_indices[position]

    def validate(self) -> None:
        owners = self.owners
        if len(set(owners)) != len(owners):
            raise DimensionMismatchError(f"duplicate owners in partition: {owners}")
        if any(j > self.current_index for j in owners):
            raise DimensionMismatchError(
                f"owner above current index {self.current_index}: {owners}"
            )
        cover = np.zeros(self.shape, dtype=np.int32)
        for _, region in self.entries:
            cover += region.bits
        if (cover > 1).any():
            raise DimensionMismatchError("partition regions overlap")
        if (cover == 0).any():
            raise DimensionMismatchError("partition does not cover the grid")


# -- rasterization ---------------------------------------------------------


def rasterize_rect(
    x0: int, y0: int, x1: int, y1: int, width: int, height: int
) -> Mask:
    """Inclusive cell-range rectangle, clamped to the canvas."""
    if x1 < x0 or y1 < y0:
        raise DegenerateMaskError(f"rectangle ({x0},{y0})-({x1},{y1}) has no area")
    cx0, cy0 = max(x0, 0), max(y0, 0)
    cx1, cy1 = min(x1, width - 1), min(y1, height - 1)
    if cx1 < cx0 or cy1 < cy0:
        raise DegenerateMaskError(
            f"rectangle ({x0},{y0})-({x1},{y1}) lies outside the {width}x{height} canvas"
        )
    bits = np.zeros((height, width), dtype=bool)
    bits[cy0 : cy1 + 1, cx0 : cx1 + 1] = True
    return Mask(bits)


def rasterize_polygon(
    vertices: Sequence[tuple[float, float]], width: int, height: int
) -> Mask:
    """Even-odd fill: a cell is set iff its center lies strictly inside."""
    if len(vertices) < 3:
        raise DegenerateMaskError(f"polygon needs >= 3 vertices, got {len(vertices)}")
    vx = np.array([v[0] for v in vertices], dtype=np.float64)
    vy = np.array([v[1] for v in vertices], dtype=np.float64)
    px, py = np.meshgrid(
        np.arange(width, dtype=np.float64) + 0.5,
        np.arange(height, dtype=np.float64) + 0.5,
    )
    inside = np.zeros((height, width), dtype=bool)
    n = len(vertices)
    for k in range(n):
        x1, y1 = vx[k], vy[k]
        x2, y2 = vx[(k + 1) % n], vy[(k + 1) % n]
        if y1 == y2:
            continue
        crosses = ((y1 > py) != (y2 > py)) & (
            px < (x2 - x1) * (py - y1) / (y2 - y1) + x1
        )
        inside ^= crosses
    if not inside.any():
        raise DegenerateMaskError("polygon covers no cells on this canvas")
    return Mask(inside)


def rasterize_ellipse(
    cx: float, cy: float, rx: float, ry: float, width: int, height: int
) -> Mask:
    """Set cells whose center lies inside the ellipse."""
    if rx <= 0 or ry <= 0:
        raise DegenerateMaskError(f"ellipse radii must be positive, got ({rx},{ry})")
    px, py = np.meshgrid(
        np.arange(width, dtype=np.float64) + 0.5,
        np.arange(height, dtype=np.float64) + 0.5,
    )
    inside = ((px - cx) / rx) ** 2 + ((py - cy) / ry) ** 2 <= 1.0
    if not inside.any():
        raise DegenerateMaskError("ellipse covers no cells on this canvas")
    return Mask(inside)


def rasterize_mask(shape: Sequence, width: int, height: int) -> Mask:
    """Dispatch on a compact shape spec.

    Accepted forms:
      ("rect", x0, y0, x1, y1)
      ("poly", [(x, y), ...])
      ("ellipse", cx, cy, rx, ry)
    """
    kind = shape[0]
    if kind == "rect":
        return rasterize_rect(*shape[1:5], width=width, height=height)
    if kind == "poly":
        return rasterize_polygon(shape[1], width=width, height=height)
    if kind == "ellipse":
        return rasterize_ellipse(*shape[1:5], width=width, height=height)
    raise DegenerateMaskError(f"unknown shape kind {kind!r}")


# -- resampling --------------------------------------------------------------


def downsample_mask(mask: Mask, target_height: int, target_width: int) -> Mask:
    """Majority-vote block reduction; a tie sets the latent cell."""
    if mask.height % target_height or mask.width % target_width:
        raise DimensionMismatchError(
            f"image dims {mask.shape} are not an integer multiple of "
            f"latent dims ({target_height}, {target_width})"
        )
    fh = mask.height // target_height
    fw = mask.width // target_width
    blocks = mask.bits.reshape(target_height, fh, target_width, fw)
    counts = blocks.sum(axis=(1, 3))
    return Mask(2 * counts >= fh * fw)


def upsample_mask(mask: Mask, factor: int) -> Mask:
    """Nearest-neighbor expansion (inverse display form of downsampling)."""
    return Mask(np.repeat(np.repeat(mask.bits, factor, axis=0), factor, axis=1))


# -- region algebra ----------------------------------------------------------


def exclusive_region(masks: Sequence[Mask], j: int) -> Mask:
    """Mask j with every cell covered by any later mask cleared.

    ``masks`` is the ordered memory stack m_0..m_i; set semantics, so the
    result is never negative and is a subset of masks[j].
    """
    if not 0 <= j < len(masks) - 1:
        raise LayerLookupError(
            f"exclusive_region index {j} out of range for {len(masks)} masks"
        )
    out = masks[j].bits.copy()
    for later in masks[j + 1 :]:
        if later.shape != masks[j].shape:
            raise DimensionMismatchError(
                f"mask shape mismatch: {later.shape} vs {masks[j].shape}"
            )
        out &= ~later.bits
    return Mask(out)


def background_region(object_masks: Sequence[Mask], height: int, width: int) -> Mask:
    """Complement of the union of all object masks; all-ones when none."""
    union = np.zeros((height, width), dtype=bool)
    for m in object_masks:
        if m.shape != (height, width):
            raise DimensionMismatchError(
                f"mask shape {m.shape} does not match grid ({height}, {width})"
            )
        union |= m.bits
    return Mask(~union)


def partition(masks: Sequence[Mask]) -> RegionPartition:
    """Ownership partition for the stack m_0..m_i.

    The current (last) layer owns its whole mask; each prior layer owns what
    later masks leave visible; the background owns the rest. Entry order is
    current first, then descending prior layers, background last, so merges
    are reproducible.
    """
    if not masks:
        raise DimensionMismatchError("partition needs at least the background mask")
    if not masks[0].is_full():
        raise DegenerateMaskError("background mask (index 0) must be all-ones")
    i = len(masks) - 1
    h, w = masks[0].shape
    if i == 0:
        entries = [(0, masks[0])]
    else:
        entries = [(i, masks[i])]
        entries += [(j, exclusive_region(masks, j)) for j in range(i - 1, 0, -1)]
        entries += [(0, background_region(masks[1:], h, w))]
    part = RegionPartition(entries=tuple(entries), current_index=i)
    part.validate()
    return part


def occlusion_ratio(object_masks: Sequence[Mask]) -> float:
    """Fraction of covered cells that at least two object masks claim."""
    if len(object_masks) < 2:
        raise UndefinedRatioError("occlusion ratio needs >= 2 object masks")
    counts = np.zeros(object_masks[0].shape, dtype=np.int32)
    for m in object_masks:
        if m.shape != object_masks[0].shape:
            raise DimensionMismatchError(
                f"mask shape mismatch: {m.shape} vs {object_masks[0].shape}"
            )
        counts += m.bits
    covered = int((counts >= 1).sum())
    if covered == 0:
        raise UndefinedRatioError("occlusion ratio undefined for all-empty masks")
    return int((counts >= 2).sum()) / covered

"""Seeded random layouts under margin/size constraints.

Masks are sampled at image resolution. Overlap is permitted (it is the point
of a mask-ordered benchmark) but bounded: a candidate whose area is covered
by earlier masks beyond ``max_overlap_frac`` is resampled, which keeps every
layer partly visible. Infeasible parameter sets fail after bounded retries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MaskEditError
from ..masks import Mask, rasterize_ellipse, rasterize_rect


@dataclass(frozen=True)
class LayoutConstraints:
    canvas_width: int = 256
    canvas_height: int = 256
    margin: int = 16
    min_size_frac: float = 0.18
    max_size_frac: float = 0.45
    max_overlap_frac: float = 0.65
    ellipse_prob: float = 0.3
    max_retries: int = 80

    def __post_init__(self):
        if not 0.0 < self.min_size_frac <= self.max_size_frac <= 1.0:
            raise MaskEditError("size fractions must satisfy 0 < min <= max <= 1")
        if self.margin < 0:
            raise MaskEditError("margin must be non-negative")

    def to_dict(self) -> dict:
        return {
            "canvas_width": self.canvas_width,
            "canvas_height": self.canvas_height,
            "margin": self.margin,
            "min_size_frac": self.min_size_frac,
            "max_size_frac": self.max_size_frac,
            "max_overlap_frac": self.max_overlap_frac,
            "ellipse_prob": self.ellipse_prob,
            "max_retries": self.max_retries,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "LayoutConstraints":
        return cls(**payload)


class LayoutError(MaskEditError):
    """Raised when no layout satisfies the constraints within the retry budget."""


def _sample_one(constraints: LayoutConstraints, rng: np.random.Generator) -> Mask:
    cw, ch = constraints.canvas_width, constraints.canvas_height
    margin = constraints.margin
    w = int(round(rng.uniform(constraints.min_size_frac, constraints.max_size_frac) * cw))
    h = int(round(rng.uniform(constraints.min_size_frac, constraints.max_size_frac) * ch))
    w = max(1, min(w, cw - 2 * margin))
    h = max(1, min(h, ch - 2 * margin))
    if cw - 2 * margin < 1 or ch - 2 * margin < 1:
        raise LayoutError(f"margin {margin} leaves no room on a {cw}x{ch} canvas")
    x0 = int(rng.integers(margin, cw - margin - w + 1))
    y0 = int(rng.integers(margin, ch - margin - h + 1))
    if rng.random() < constraints.ellipse_prob:
        return rasterize_ellipse(
            x0 + w / 2.0, y0 + h / 2.0, w / 2.0, h / 2.0, cw, ch
        )
    return rasterize_rect(x0, y0, x0 + w - 1, y0 + h - 1, cw, ch)


def layout_sample(
    n: int, constraints: LayoutConstraints, rng: np.random.Generator
) -> list[Mask]:
    """Sample n masks within margins and the size range; overlap bounded."""
    masks: list[Mask] = []
    union = np.zeros((constraints.canvas_height, constraints.canvas_width), dtype=bool)
    for index in range(n):
        for attempt in range(constraints.max_retries + 1):
            candidate = _sample_one(constraints, rng)
            covered = (candidate.bits & union).sum() / candidate.count()
            if covered <= constraints.max_overlap_frac:
                break
        else:
            raise LayoutError(
                f"mask {index}: no placement within {constraints.max_retries} retries"
            )
        masks.append(candidate)
        union |= candidate.bits
    return masks


def check_layout(masks: list[Mask], constraints: LayoutConstraints) -> None:
    """Assert every mask honors the margin (used by tests and generation)."""
    cw, ch = constraints.canvas_width, constraints.canvas_height
    m = constraints.margin
    for index, mask in enumerate(masks):
        if mask.bits[:m, :].any() or (m > 0 and mask.bits[ch - m :, :].any()):
            raise LayoutError(f"mask {index} violates the vertical margin")
        if mask.bits[:, :m].any() or (m > 0 and mask.bits[:, cw - m :].any()):
            raise LayoutError(f"mask {index} violates the horizontal margin")

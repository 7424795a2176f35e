"""Template captions with spatial relation words.

The global caption describes the whole scene (background detail included);
layer captions keep the short background name only, matching the crop-scoring
template "An image of {CLASS} in {BACKGROUND}". Relations come from mask
centers and mask order: overlapping masks read as in-front-of (later mask
wins), otherwise the dominant center axis picks left/right or above/below.
"""

from __future__ import annotations

from ..masks import Mask


def mask_center(mask: Mask) -> tuple[float, float]:
    bbox_rows = mask.bits.any(axis=1)
    bbox_cols = mask.bits.any(axis=0)
    ys = bbox_rows.nonzero()[0]
    xs = bbox_cols.nonzero()[0]
    return (float(xs[0] + xs[-1]) / 2.0, float(ys[0] + ys[-1]) / 2.0)


def relation_word(
    subject_center: tuple[float, float],
    anchor_center: tuple[float, float],
    overlaps: bool,
) -> str:
    if overlaps:
        return "in front of"
    dx = subject_center[0] - anchor_center[0]
    dy = subject_center[1] - anchor_center[1]
    if abs(dx) >= abs(dy):
        return "to the left of" if dx < 0 else "to the right of"
    return "above" if dy < 0 else "below"


def layer_caption(
    label: str,
    background_name: str,
    anchor_label: str | None = None,
    relation: str | None = None,
) -> str:
    """Per-layer caption; background detail words are deliberately excluded."""
    if anchor_label is None or relation is None:
        return f"An image of {label} in {background_name}"
    return f"An image of {label} {relation} {anchor_label} in {background_name}"


def global_caption(
    background_detail: str,
    labels: list[str],
    relations: list[tuple[str, str, str]],
) -> str:
    """Whole-scene caption: background detail, objects, then relations.

    ``relations`` holds (subject, relation, anchor) triples for layers 2+.
    """
    head = f"An image of {background_detail} with {', '.join(labels)}"
    if not relations:
        return head
    clauses = [f"{subj} {rel} {anchor}" for subj, rel, anchor in relations]
    return head + "; " + "; ".join(clauses)

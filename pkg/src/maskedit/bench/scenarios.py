"""Seeded scenario generation for the sequential-editing benchmark.

A scenario is an ordered edit script: a background plus 2..5 object layers
with masks, per-layer captions, and a global caption. The edit-step count
follows the configured distribution (default 19/18/26/37% for 2/3/4/5 steps,
so layer counts including the background span 3..6).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import MaskEditError
from ..masks import Mask, occlusion_ratio
from ..rng import stream
from .captions import global_caption, layer_caption, mask_center, relation_word
from .classes import pick_group, pick_objects
from .layout import LayoutConstraints, LayoutError, check_layout, layout_sample

# Edit-step mix: share of scenarios with 2, 3, 4 and 5 object edits.
DEFAULT_STEP_DISTRIBUTION: dict[int, float] = {2: 0.19, 3: 0.18, 4: 0.26, 5: 0.37}

SUITE_FORMAT = "multi-edit-suite-v1"


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    seed: int
    background_name: str
    background_detail: str
    labels: tuple[str, ...]          # object layers, mask order
    masks: tuple[Mask, ...]          # image resolution, same order
    layer_captions: tuple[str, ...]
    global_caption: str

    @property
    def n_layers(self) -> int:
        """Layer count including the background."""
        return len(self.labels) + 1

    @property
    def edit_steps(self) -> int:
        return len(self.labels)

    def occlusion(self) -> float:
        return occlusion_ratio(list(self.masks))

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "seed": self.seed,
            "background_name": self.background_name,
            "background_detail": self.background_detail,
            "labels": list(self.labels),
            "masks": [m.to_rle() for m in self.masks],
            "layer_captions": list(self.layer_captions),
            "global_caption": self.global_caption,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Scenario":
        return cls(
            scenario_id=payload["scenario_id"],
            seed=int(payload["seed"]),
            background_name=payload["background_name"],
            background_detail=payload["background_detail"],
            labels=tuple(payload["labels"]),
            masks=tuple(Mask.from_rle(m) for m in payload["masks"]),
            layer_captions=tuple(payload["layer_captions"]),
            global_caption=payload["global_caption"],
        )


@dataclass
class Suite:
    seed: int
    constraints: LayoutConstraints
    scenarios: list[Scenario]
    step_distribution: dict[int, float] = field(
        default_factory=lambda: dict(DEFAULT_STEP_DISTRIBUTION)
    )

    def occlusion_mean(self) -> float:
        return sum(s.occlusion() for s in self.scenarios) / len(self.scenarios)

    def step_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for s in self.scenarios:
            hist[s.edit_steps] = hist.get(s.edit_steps, 0) + 1
        return hist

    def to_dict(self) -> dict:
        return {
            "format": SUITE_FORMAT,
            "seed": self.seed,
            "constraints": self.constraints.to_dict(),
            "step_distribution": {str(k): v for k, v in self.step_distribution.items()},
            "occlusion_mean": self.occlusion_mean(),
            "scenarios": [s.to_dict() for s in self.scenarios],
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def load(cls, path) -> "Suite":
        payload = json.loads(Path(path).read_text())
        if payload.get("format") != SUITE_FORMAT:
            raise MaskEditError(f"unrecognized suite format in {path}")
        return cls(
            seed=int(payload["seed"]),
            constraints=LayoutConstraints.from_dict(payload["constraints"]),
            scenarios=[Scenario.from_dict(s) for s in payload["scenarios"]],
            step_distribution={
                int(k): float(v) for k, v in payload["step_distribution"].items()
            },
        )


def _sample_steps(rng, distribution: dict[int, float]) -> int:
    counts = sorted(distribution)
    weights = [distribution[k] for k in counts]
    total = sum(weights)
    u = rng.random() * total
    acc = 0.0
    for k, w in zip(counts, weights):
        acc += w
        if u < acc:
            return k
    return counts[-1]


def generate_scenario(seed: int, index: int, constraints: LayoutConstraints,
                      distribution: dict[int, float] | None = None) -> Scenario:
    distribution = distribution or DEFAULT_STEP_DISTRIBUTION
    rng = stream("scenario", seed, index)
    steps = _sample_steps(rng, distribution)
    group = pick_group(rng)
    labels = pick_objects(group, steps, rng)
    try:
        masks = layout_sample(steps, constraints, rng)
    except LayoutError as err:
        raise LayoutError(f"scenario {index}: {err}") from err
    check_layout(masks, constraints)

    centers = [mask_center(m) for m in masks]
    captions = [layer_caption(labels[0], group.background)]
    relations: list[tuple[str, str, str]] = []
    for k in range(1, steps):
        overlaps = not masks[k].intersect(masks[k - 1]).is_empty()
        rel = relation_word(centers[k], centers[k - 1], overlaps)
        relations.append((labels[k], rel, labels[k - 1]))
        captions.append(
            layer_caption(labels[k], group.background, anchor_label=labels[k - 1],
                          relation=rel)
        )
    return Scenario(
        scenario_id=f"s{index:04d}",
        seed=seed,
        background_name=group.background,
        background_detail=group.background_detail,
        labels=tuple(labels),
        masks=tuple(masks),
        layer_captions=tuple(captions),
        global_caption=global_caption(group.background_detail, labels, relations),
    )


def generate_scenarios(
    seed: int,
    count: int,
    constraints: LayoutConstraints | None = None,
    distribution: dict[int, float] | None = None,
) -> Suite:
    """Deterministic scenario suite for (seed, count, constraints)."""
    if count < 1:
        raise MaskEditError(f"need at least one scenario, got count={count}")
    constraints = constraints or LayoutConstraints()
    distribution = distribution or DEFAULT_STEP_DISTRIBUTION
    scenarios = [
        generate_scenario(seed, index, constraints, distribution)
        for index in range(count)
    ]
    return Suite(seed=seed, constraints=constraints, scenarios=scenarios,
                 step_distribution=dict(distribution))

"""Layer-wise suite evaluation.

Every scenario is scored by cropping each object layer out of the rendered
image at its mask's bounding box (resized to 224x224), applying the internal
text scorers (candidate = the prompt the engine actually rendered, reference
= the scenario caption) plus any registered external scorers (the image/text
slot a CLIP- or captioner-backed scorer would fill), then averaging over
layers per image and over images per suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from ..errors import DimensionMismatchError, MaskEditError
from ..masks import Mask, downsample_mask
from ..session import EditSession, RgbImage, SessionConfig
from .crops import CROP_SIZE, crop_layers
from .metrics import bleu, meteor_exact
from .scenarios import Scenario, Suite

# External scorer contract: (crop PNG bytes, caption text) -> score in [0, 1].
ExternalScorer = Callable[[bytes, str], float]
# Internal text scorer: (candidate, reference) -> score in [0, 1].
TextScorer = Callable[[str, str], float]


def default_text_scorers() -> dict[str, TextScorer]:
    return {
        "bleu2": lambda cand, ref: bleu(cand, ref, 4)[2],
        "bleu3": lambda cand, ref: bleu(cand, ref, 4)[3],
        "bleu4": lambda cand, ref: bleu(cand, ref, 4)[4],
        "meteor_exact": meteor_exact,
    }


@dataclass(frozen=True)
class ScenarioResult:
    """What one engine run hands back for scoring."""

    scenario_id: str
    image: RgbImage
    layer_labels: tuple[str, ...]  # object layers only, mask order


@dataclass
class LayerScore:
    layer_index: int
    label: str
    caption: str
    scores: dict[str, float]


@dataclass
class ImageScore:
    scenario_id: str
    layers: list[LayerScore]
    failed: bool = False
    notices: list[str] = field(default_factory=list)

    def averages(self) -> dict[str, float]:
        if not self.layers:
            return {}
        keys = self.layers[0].scores.keys()
        return {
            k: sum(layer.scores[k] for layer in self.layers) / len(self.layers)
            for k in keys
        }


@dataclass
class ScoreReport:
    images: list[ImageScore]
    structural: dict

    def suite_averages(self) -> dict[str, float]:
        scored = [img for img in self.images if not img.failed and img.layers]
        if not scored:
            return {}
        keys = scored[0].averages().keys()
        return {
            k: sum(img.averages()[k] for img in scored) / len(scored) for k in keys
        }

    def to_dict(self) -> dict:
        return {
            "structural": self.structural,
            "suite_averages": self.suite_averages(),
            "images": [
                {
                    "scenario_id": img.scenario_id,
                    "failed": img.failed,
                    "notices": img.notices,
                    "averages": img.averages(),
                    "layers": [
                        {
                            "layer_index": layer.layer_index,
                            "label": layer.label,
                            "caption": layer.caption,
                            "scores": layer.scores,
                        }
                        for layer in img.layers
                    ],
                }
                for img in self.images
            ],
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    def to_table(self) -> str:
        avg = self.suite_averages()
        lines = ["scenario  layers  " + "  ".join(f"{k:>12}" for k in sorted(avg))]
        for img in self.images:
            if img.failed:
                lines.append(f"{img.scenario_id:<9} FAILED")
                continue
            a = img.averages()
            lines.append(
                f"{img.scenario_id:<9} {len(img.layers):>6}  "
                + "  ".join(f"{a[k]:>12.4f}" for k in sorted(avg))
            )
        lines.append(
            f"{'suite':<9} {self.structural['evaluated']:>6}  "
            + "  ".join(f"{avg[k]:>12.4f}" for k in sorted(avg))
        )
        return "\n".join(lines)


def run_scenario(scenario: Scenario, config: SessionConfig) -> ScenarioResult:
    """Execute one scenario's edit script on a fresh session."""
    if (
        scenario.masks[0].shape != (config.image_height, config.image_width)
        and scenario.masks[0].shape != (config.latent_height, config.latent_width)
    ):
        raise DimensionMismatchError(
            f"scenario masks {scenario.masks[0].shape} match neither the image "
            f"({config.image_height}, {config.image_width}) nor the latent grid"
        )
    session = EditSession.create(
        scenario.background_detail, seed=scenario.seed, config=config
    )
    for caption, mask in zip(scenario.layer_captions, scenario.masks):
        if mask.shape == (config.image_height, config.image_width):
            mask = downsample_mask(mask, config.latent_height, config.latent_width)
        session.add_edit(caption, mask)
    return ScenarioResult(
        scenario_id=scenario.scenario_id,
        image=session.render(),
        layer_labels=tuple(scenario.layer_captions),
    )


def run_suite(suite: Suite, config: SessionConfig) -> list[ScenarioResult]:
    return [run_scenario(s, config) for s in suite.scenarios]


def evaluate_suite(
    results: Mapping[str, ScenarioResult] | list[ScenarioResult],
    suite: Suite,
    text_scorers: dict[str, TextScorer] | None = None,
    external_scorers: dict[str, ExternalScorer] | None = None,
    crop_size: int = CROP_SIZE,
) -> ScoreReport:
    """Score rendered results against their scenarios, layer by layer.

    ``text_scorers`` defaults to the internal BLEU/METEOR set; pass {} for a
    structural-stats-only report. Missing renders mark the scenario failed
    and exclude it from averages.
    """
    if not isinstance(results, Mapping):
        results = {r.scenario_id: r for r in results}
    if text_scorers is None:
        text_scorers = default_text_scorers()
    external_scorers = external_scorers or {}

    images: list[ImageScore] = []
    failed: list[str] = []
    for scenario in suite.scenarios:
        result = results.get(scenario.scenario_id)
        if result is None:
            failed.append(scenario.scenario_id)
            images.append(
                ImageScore(
                    scenario_id=scenario.scenario_id,
                    layers=[],
                    failed=True,
                    notices=["missing render"],
                )
            )
            continue
        if len(result.layer_labels) != len(scenario.labels):
            raise MaskEditError(
                f"{scenario.scenario_id}: result has {len(result.layer_labels)} "
                f"layers, scenario defines {len(scenario.labels)}"
            )
        masks = [_mask_at_image_resolution(m, result.image) for m in scenario.masks]
        crops, notices = crop_layers(result.image, masks, size=crop_size)
        layer_scores: list[LayerScore] = []
        for layer_index, crop in crops:
            caption = scenario.layer_captions[layer_index]
            candidate = result.layer_labels[layer_index]
            scores = {
                name: scorer(candidate, caption)
                for name, scorer in text_scorers.items()
            }
            if external_scorers:
                png = crop.to_png_bytes()
                scores.update(
                    {name: scorer(png, caption) for name, scorer in external_scorers.items()}
                )
            _check_unit_interval(scores, scenario.scenario_id, layer_index)
            layer_scores.append(
                LayerScore(
                    layer_index=layer_index,
                    label=candidate,
                    caption=caption,
                    scores=scores,
                )
            )
        images.append(
            ImageScore(scenario_id=scenario.scenario_id, layers=layer_scores,
                       notices=notices)
        )

    structural = {
        "scenario_count": len(suite.scenarios),
        "evaluated": len(suite.scenarios) - len(failed),
        "failed": failed,
        "occlusion_mean": suite.occlusion_mean(),
        "step_histogram": {str(k): v for k, v in sorted(suite.step_histogram().items())},
        "crop_size": [crop_size, crop_size],
    }
    return ScoreReport(images=images, structural=structural)


def _mask_at_image_resolution(mask: Mask, image: RgbImage) -> Mask:
    if mask.shape == (image.height, image.width):
        return mask
    if image.height % mask.height == 0 and image.width % mask.width == 0:
        from ..masks import upsample_mask

        factor = image.height // mask.height
        if mask.width * factor == image.width:
            return upsample_mask(mask, factor)
    raise DimensionMismatchError(
        f"mask {mask.shape} cannot be aligned to image ({image.height}, {image.width})"
    )


def _check_unit_interval(scores: dict[str, float], scenario_id: str, layer: int) -> None:
    for name, value in scores.items():
        if not 0.0 <= value <= 1.0:
            raise MaskEditError(
                f"{scenario_id} layer {layer}: scorer {name!r} returned {value} "
                "outside [0, 1]"
            )

"""Desk-scale sequential-editing benchmark: seeded scenario generation,
layer-wise crop scoring, and text alignment metrics."""

from .crops import CROP_SIZE, bilinear_resize, crop_layers, mask_bbox
from .evaluate import (
    ScenarioResult,
    ScoreReport,
    default_text_scorers,
    evaluate_suite,
    run_scenario,
    run_suite,
)
from .layout import LayoutConstraints, LayoutError, check_layout, layout_sample
from .metrics import bleu, meteor_exact, tokenize
from .scenarios import (
    DEFAULT_STEP_DISTRIBUTION,
    Scenario,
    Suite,
    generate_scenario,
    generate_scenarios,
)

__all__ = [
    "CROP_SIZE",
    "DEFAULT_STEP_DISTRIBUTION",
    "LayoutConstraints",
    "LayoutError",
    "Scenario",
    "ScenarioResult",
    "ScoreReport",
    "Suite",
    "bilinear_resize",
    "bleu",
    "check_layout",
    "crop_layers",
    "default_text_scorers",
    "evaluate_suite",
    "generate_scenario",
    "generate_scenarios",
    "layout_sample",
    "mask_bbox",
    "meteor_exact",
    "run_scenario",
    "run_suite",
    "tokenize",
]

"""The per-edit denoising loop with background-consistency blending.

Two modes share the loop:

  * ``bcg``: after every scheduler step, values outside the edit mask are
    replaced by the memorized previous-layer latent at the same timestep.
    Nothing about the previous image is ever recomputed (forward_cost == 0).
  * ``lb``: the latent-blending baseline. Identical, except the out-of-mask
    target at each step is recomputed by forward-noising the previous final
    latent, costing one forward pass per step.

Counters are the cost model's ground truth: ``denoiser_calls`` is the number
of predict() invocations (T per edit), ``omega`` is calls x blocks (the
analytic proxy is steps x layers), and ``forward_cost`` counts previous-image
forward passes. Wall time is recorded but never used for correctness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .denoiser import (
    DenoiserBackend,
    DenoiserConfig,
    LayerPrompt,
    embed_prompt,
    forward_noise,
    sample_init_latent,
    scheduler_step,
)
from .errors import DegenerateMaskError, DimensionMismatchError, LayerLookupError
from .masks import Mask, partition
from .memory import LayerMemory, LayerRecord
from .rng import stream

MODE_BCG = "bcg"
MODE_LB = "lb"


@dataclass(frozen=True)
class CostReport:
    """Measured (or analytic) cost of one operation."""

    mode: str
    layer_index: int
    denoiser_calls: int
    omega: int
    forward_cost: int
    wall_ms: float

    @property
    def r(self) -> float:
        """Forward-pass cost as a fraction of the base denoising cost."""
        if self.omega == 0:  # zero-step operations (topmost-layer deletion)
            return 0.0
        return self.forward_cost / self.omega

    @property
    def efficiency_gain(self) -> float:
        """Total cost of this run relative to a run that skips forward passes."""
        if self.omega == 0:
            return 1.0
        return (self.omega + self.forward_cost) / self.omega

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "layer_index": self.layer_index,
            "denoiser_calls": self.denoiser_calls,
            "omega": self.omega,
            "forward_cost": self.forward_cost,
            "r": self.r,
            "efficiency_gain": self.efficiency_gain,
            "wall_ms": self.wall_ms,
        }


def masked_blend(new: np.ndarray, prev: np.ndarray, mask: Mask) -> np.ndarray:
    """Inside the mask: new values; outside: element-exact copies of prev.

    The mask lives at latent resolution and broadcasts across channels.
    """
    if new.shape != prev.shape:
        raise DimensionMismatchError(f"latent shapes differ: {new.shape} vs {prev.shape}")
    if new.shape[1:] != mask.shape:
        raise DimensionMismatchError(
            f"mask {mask.shape} does not match latent grid {new.shape[1:]}"
        )
    return np.where(mask.bits[None, :, :], new, prev)


def layer_prompts(memory: LayerMemory) -> dict[int, LayerPrompt]:
    return {
        i: LayerPrompt(rec.label, rec.prompt)
        for i, rec in enumerate(memory.snapshot())
    }


def run_background_denoise(
    label: str,
    backend: DenoiserBackend,
    config: DenoiserConfig,
    channels: int,
    height: int,
    width: int,
    seed: int,
) -> tuple[LayerRecord, CostReport]:
    """Full T-step denoise of layer 0 under a single all-ones region."""
    started = time.perf_counter()
    steps = config.num_steps
    mask = Mask.all_ones(height, width)
    part = partition([mask])
    emb = embed_prompt(label, config.d_model, config.embed_seed)
    prompts = {0: LayerPrompt(label, emb)}
    z = sample_init_latent(seed, 0, channels, height, width)
    trajectory: list[np.ndarray] = [None] * (steps + 1)  # type: ignore[list-item]
    trajectory[steps] = z
    calls = 0
    for t in range(steps, 0, -1):
        pred = backend.predict(z, t, part, prompts)
        calls += 1
        z = scheduler_step(z, pred, t, steps)
        trajectory[t - 1] = z
    record = LayerRecord(label=label, prompt=emb, trajectory=tuple(trajectory), mask=mask)
    report = CostReport(
        mode=MODE_BCG,
        layer_index=0,
        denoiser_calls=calls,
        omega=calls * config.num_blocks,
        forward_cost=0,
        wall_ms=(time.perf_counter() - started) * 1000.0,
    )
    return record, report


def run_edit_denoise(
    memory: LayerMemory,
    label: str,
    mask: Mask,
    backend: DenoiserBackend,
    config: DenoiserConfig,
    seed: int,
    mode: str = MODE_BCG,
) -> tuple[LayerRecord, CostReport]:
    """Denoise one new edit layer against the session memory.

    Returns the record holding the stored (post-blend) trajectory and the
    measured cost. The record is not appended here; the session owns that.
    """
    if mode not in (MODE_BCG, MODE_LB):
        raise LayerLookupError(f"unknown edit mode {mode!r}")
    if len(memory) < 1:
        raise LayerLookupError("session has no background layer yet")
    if mask.is_empty():
        raise DegenerateMaskError("empty edit mask; nothing to edit")
    started = time.perf_counter()
    steps = config.num_steps
    i = len(memory)
    channels, height, width = memory.record(0).latent_shape
    if mask.shape != (height, width):
        raise DimensionMismatchError(
            f"edit mask {mask.shape} does not match latent grid ({height}, {width})"
        )

    part = partition(memory.masks() + [mask])
    emb = embed_prompt(label, config.d_model, config.embed_seed)
    prompts = layer_prompts(memory)
    prompts[i] = LayerPrompt(label, emb)

    calls = 0
    forward_cost = 0
    prev_final = memory.latent_at(i - 1, 0)

    def blend_target(t: int) -> np.ndarray:
        nonlocal forward_cost
        if mode == MODE_BCG:
            return memory.latent_at(i - 1, t)
        noise = stream("lb-noise", seed, i, t).standard_normal(
            (channels, height, width), dtype=np.float32
        )
        forward_cost += 1
        return forward_noise(prev_final, t, noise, steps)

    z = sample_init_latent(seed, i, channels, height, width)
    trajectory: list[np.ndarray] = [None] * (steps + 1)  # type: ignore[list-item]
    if mode == MODE_BCG:
        # Preserve the background at every stored timestep, t = T included.
        z = masked_blend(z, memory.latent_at(i - 1, steps), mask)
    trajectory[steps] = z
    for t in range(steps, 0, -1):
        pred = backend.predict(z, t, part, prompts)
        calls += 1
        z = scheduler_step(z, pred, t, steps)
        z = masked_blend(z, blend_target(t - 1), mask)
        trajectory[t - 1] = z

    record = LayerRecord(label=label, prompt=emb, trajectory=tuple(trajectory), mask=mask)
    report = CostReport(
        mode=mode,
        layer_index=i,
        denoiser_calls=calls,
        omega=calls * config.num_blocks,
        forward_cost=forward_cost,
        wall_ms=(time.perf_counter() - started) * 1000.0,
    )
    return record, report


@dataclass(frozen=True)
class AnalyticCost:
    """Closed-form cost of one edit for a given forward-pass ratio r."""

    omega: float
    forward_cost: float
    cost_lb: float
    cost_bcg: float
    r: float
    efficiency_gain: float


def cost_model(
    num_steps: int, num_layers: int, height: int, width: int, r: float
) -> AnalyticCost:
    """Analytic cost of one edit: base cost steps x layers, forward cost r x that.

    Grid dims are part of the interface but the proxy counts operations, not
    FLOPs: counters are exact and portable, FLOP totals are hardware noise.
    The gain is 1 + r identically, which measured integer counters reproduce
    exactly: (omega + forward_cost) / omega == 1 + forward_cost / omega.
    """
    if num_steps <= 0 or num_layers <= 0 or height <= 0 or width <= 0:
        raise DimensionMismatchError("cost model inputs must be positive")
    if not 0.0 <= r < 1.0:
        raise DimensionMismatchError(f"forward-cost ratio r={r} outside [0, 1)")
    omega = float(num_steps * num_layers)
    return AnalyticCost(
        omega=omega,
        forward_cost=r * omega,
        cost_lb=(1.0 + r) * omega,
        cost_bcg=omega,
        r=r,
        efficiency_gain=1.0 + r,
    )

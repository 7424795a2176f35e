"""Iterative mask-ordered image editing on latent grids.

Add objects with rough binary masks; later masks occlude earlier ones. Every
edit's full latent trajectory is memorized, unedited regions are copied (not
recomputed) from memory at every denoising step, and cross-attention routes
each visible region to the prompt that owns it. Occluded objects can be
deleted by resuming denoising from an intermediate step without the target's
mask or prompt.
"""

from .denoiser import (
    BACKENDS,
    DenoiserConfig,
    LayerPrompt,
    cfg_combine,
    embed_prompt,
    make_denoiser,
    null_prompt,
    sample_init_latent,
    scheduler_step,
)
from .errors import (
    DegenerateMaskError,
    DimensionMismatchError,
    LayerLookupError,
    MaskEditError,
    NumericError,
    UndefinedRatioError,
)
from .guidance import (
    AnalyticCost,
    CostReport,
    MODE_BCG,
    MODE_LB,
    cost_model,
    masked_blend,
    run_edit_denoise,
)
from .masks import (
    Mask,
    RegionPartition,
    background_region,
    downsample_mask,
    exclusive_region,
    occlusion_ratio,
    partition,
    rasterize_mask,
)
from .memory import LayerMemory, LayerRecord, PromptEmbedding
from .session import EditSession, RgbImage, SessionConfig, decode_latent

__all__ = [
    "BACKENDS",
    "AnalyticCost",
    "CostReport",
    "DegenerateMaskError",
    "DenoiserConfig",
    "DimensionMismatchError",
    "EditSession",
    "LayerLookupError",
    "LayerMemory",
    "LayerPrompt",
    "LayerRecord",
    "MODE_BCG",
    "MODE_LB",
    "Mask",
    "MaskEditError",
    "NumericError",
    "PromptEmbedding",
    "RegionPartition",
    "RgbImage",
    "SessionConfig",
    "UndefinedRatioError",
    "background_region",
    "cfg_combine",
    "cost_model",
    "decode_latent",
    "downsample_mask",
    "embed_prompt",
    "exclusive_region",
    "make_denoiser",
    "masked_blend",
    "null_prompt",
    "occlusion_ratio",
    "partition",
    "rasterize_mask",
    "run_edit_denoise",
    "sample_init_latent",
    "scheduler_step",
]

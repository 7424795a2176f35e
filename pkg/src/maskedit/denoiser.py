"""Pluggable denoisers over latent grids, plus prompt embedding and the scheduler.

Two backends share one contract (``predict(latent, t, partition, prompts)``
returns the predicted denoised latent):

  * ``toy-dit``: a K-block pre-norm transformer with seeded random weights,
    never trained. Patch size is 1 (one token per latent cell) so attention
    routing aligns exactly with masks. Both token-mixing paths are
    region-disentangled: self-attention is confined to each partition region
    and cross-attention routes each region's queries to its owner's prompt
    only. That makes the whole forward pass region-local — perturbing one
    layer's prompt cannot change any other region's output, exactly.
  * ``procedural``: a deterministic label-keyed pattern generator, so
    compositing semantics are checkable pixel-for-pixel.

The scheduler is a simplified deterministic convex update (not a solver):
z_{t-1} = a_{t-1} * prediction + (1 - a_{t-1}) * z_t with a_t = 1 - t/T,
so the final step returns the prediction exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol

import numpy as np

from .errors import DegenerateMaskError, DimensionMismatchError, NumericError
from .masks import RegionPartition
from .memory import PromptEmbedding
from .rng import stable_token_id, stream

NULL_TOKEN = "<null>"


@dataclass(frozen=True)
class DenoiserConfig:
    num_blocks: int = 4
    d_model: int = 64
    num_heads: int = 4
    num_steps: int = 20
    guidance_scale: float = 7.5
    weight_seed: int = 0
    embed_seed: int = 0

    def __post_init__(self):
        if self.d_model % self.num_heads:
            raise DimensionMismatchError(
                f"d_model {self.d_model} not divisible by {self.num_heads} heads"
            )
        if self.num_steps < 2:
            raise DimensionMismatchError(f"need >= 2 denoising steps, got {self.num_steps}")


@dataclass(frozen=True)
class LayerPrompt:
    """What a backend needs per owning layer: source text and its embedding."""

    label: str
    embedding: PromptEmbedding


@dataclass(frozen=True)
class BlockActivations:
    """Token matrix ((H*W) x d_model) flowing through block k at timestep t."""

    tokens: np.ndarray
    timestep: int
    block: int


# -- prompt embedding ---------------------------------------------------------


def embed_prompt(text: str, d_model: int, embed_seed: int = 0) -> PromptEmbedding:
    """Lowercase whitespace tokens; one seeded pseudo-random row per token."""
    words = text.lower().split()
    if not words:
        raise DegenerateMaskError("cannot embed an empty prompt")
    ids = tuple(stable_token_id(w) for w in words)
    rows = [
        stream("embed", embed_seed, tid).standard_normal(d_model, dtype=np.float32)
        for tid in ids
    ]
    return PromptEmbedding(tokens=ids, vectors=np.stack(rows))


def null_prompt(d_model: int, embed_seed: int = 0) -> PromptEmbedding:
    """The reserved single-token prompt used by the unconditional branch."""
    tid = stable_token_id(NULL_TOKEN)
    row = stream("embed", embed_seed, tid).standard_normal(d_model, dtype=np.float32)
    return PromptEmbedding(tokens=(tid,), vectors=row[None, :])


# -- latent sampling and the scheduler ----------------------------------------


def sample_init_latent(
    seed: int, layer_index: int, channels: int, height: int, width: int
) -> np.ndarray:
    """Standard-normal init noise from a counter PRNG keyed by (seed, layer)."""
    gen = stream("init-latent", seed, layer_index)
    return gen.standard_normal((channels, height, width), dtype=np.float32)


def _alpha(t: int, num_steps: int) -> np.float32:
    return np.float32(1.0 - t / num_steps)


def scheduler_step(
    z_t: np.ndarray, prediction: np.ndarray, t: int, num_steps: int
) -> np.ndarray:
    """Deterministic convex move toward the prediction; exact at the last step."""
    if not 1 <= t <= num_steps:
        raise DimensionMismatchError(f"timestep {t} out of range 1..{num_steps}")
    if z_t.shape != prediction.shape:
        raise DimensionMismatchError(f"shapes differ: {z_t.shape} vs {prediction.shape}")
    a = _alpha(t - 1, num_steps)
    return a * prediction + (np.float32(1.0) - a) * z_t


def forward_noise(
    x0: np.ndarray, t: int, noise: np.ndarray, num_steps: int
) -> np.ndarray:
    """Re-noise a clean latent to level t (the latent-blending baseline path)."""
    if not 0 <= t <= num_steps:
        raise DimensionMismatchError(f"timestep {t} out of range 0..{num_steps}")
    a = _alpha(t, num_steps)
    return a * x0 + (np.float32(1.0) - a) * noise


def cfg_combine(
    uncond_pred: np.ndarray, cond_pred: np.ndarray, scale: float
) -> np.ndarray:
    """uncond + scale * (cond - uncond), evaluated as (1-scale)*uncond +
    scale*cond so the scale 0 and 1 endpoints are bit-exact."""
    if uncond_pred.shape != cond_pred.shape:
        raise DimensionMismatchError(
            f"shapes differ: {uncond_pred.shape} vs {cond_pred.shape}"
        )
    s = np.float32(scale)
    return (np.float32(1.0) - s) * uncond_pred + s * cond_pred


# -- attention primitives ------------------------------------------------------


def timestep_embedding(t: int, d_model: int) -> np.ndarray:
    """Sinusoidal embedding of the timestep, added to every token."""
    half = d_model // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    angles = t * freqs
    emb = np.concatenate([np.sin(angles), np.cos(angles)])
    if emb.size < d_model:
        emb = np.concatenate([emb, np.zeros(d_model - emb.size)])
    return emb.astype(np.float32)


def layer_norm(x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return ((x - mean) / np.sqrt(var + np.float32(eps))).astype(np.float32)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def split_heads(x: np.ndarray, num_heads: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, num_heads, d // num_heads).transpose(1, 0, 2)


def attention(
    q: np.ndarray, k: np.ndarray, v: np.ndarray, num_heads: int
) -> np.ndarray:
    """Multi-head scaled dot-product attention on projected q/k/v."""
    qh = split_heads(q, num_heads)
    kh = split_heads(k, num_heads)
    vh = split_heads(v, num_heads)
    scale = np.float32(1.0 / np.sqrt(qh.shape[-1]))
    weights = softmax(np.einsum("hnd,hmd->hnm", qh, kh) * scale)
    out = np.einsum("hnm,hmd->hnd", weights, vh)
    return out.transpose(1, 0, 2).reshape(q.shape[0], -1).astype(np.float32)


@dataclass(frozen=True)
class AttentionWeights:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray


@dataclass(frozen=True)
class BlockWeights:
    self_attn: AttentionWeights
    cross_attn: AttentionWeights
    ff_in: np.ndarray
    ff_out: np.ndarray


def cross_attention(
    tokens: np.ndarray,
    prompt: PromptEmbedding,
    weights: AttentionWeights,
    num_heads: int,
) -> np.ndarray:
    """Plain cross-attention of all given tokens over one prompt."""
    q = tokens @ weights.w_q
    k = prompt.vectors @ weights.w_k
    v = prompt.vectors @ weights.w_v
    return attention(q, k, v, num_heads) @ weights.w_o


def mqd_cross_attention(
    acts: BlockActivations,
    part: RegionPartition,
    prompts: Mapping[int, LayerPrompt],
    weights: AttentionWeights,
    num_heads: int,
) -> BlockActivations:
    """Region-routed cross-attention.

    Each partition entry's query tokens attend only to the owning layer's
    prompt; results are scattered back into their positions. Regions are
    disjoint and cover the grid, so every token is written exactly once and
    attention mass on any other layer's prompt is zero by construction.
    """
    tokens = acts.tokens
    out = np.empty_like(tokens)
    writes = np.zeros(tokens.shape[0], dtype=np.int8)
    for pos, (owner, _) in enumerate(part.entries):
        idx = part.token_indices(pos)
        if idx.size == 0:
            continue
        out[idx] = cross_attention(tokens[idx], prompts[owner].embedding, weights, num_heads)
        writes[idx] += 1
    if not (writes == 1).all():
        raise NumericError("partition left tokens uncovered or double-written")
    return BlockActivations(tokens=out, timestep=acts.timestep, block=acts.block)


def masked_self_attention(
    tokens: np.ndarray,
    part: RegionPartition,
    weights: AttentionWeights,
    num_heads: int,
) -> np.ndarray:
    """Self-attention confined to each partition region.

    Keeps the forward pass region-local: no latent information crosses region
    boundaries, so edits cannot disturb content they do not own.
    """
    out = np.empty_like(tokens)
    for pos in range(len(part.entries)):
        idx = part.token_indices(pos)
        if idx.size == 0:
            continue
        sub = tokens[idx]
        q = sub @ weights.w_q
        k = sub @ weights.w_k
        v = sub @ weights.w_v
        out[idx] = attention(q, k, v, num_heads) @ weights.w_o
    return out


# -- backends ------------------------------------------------------------------


class DenoiserBackend(Protocol):
    config: DenoiserConfig

    def predict(
        self,
        latent: np.ndarray,
        t: int,
        part: RegionPartition,
        prompts: Mapping[int, LayerPrompt],
    ) -> np.ndarray: ...


class ToyDitDenoiser:
    """K blocks of {region-masked self-attention, region-routed cross-attention,
    feedforward}, each pre-norm with residuals; weights are seeded scaled
    normals (std 1/sqrt(d_model)) and immutable after construction."""

    name = "toy-dit"

    def __init__(self, channels: int, config: DenoiserConfig):
        self.channels = channels
        self.config = config
        d = config.d_model
        gen = stream("weights", config.weight_seed)
        std = 1.0 / np.sqrt(d)

        def mat(rows: int, cols: int) -> np.ndarray:
            w = (gen.standard_normal((rows, cols)) * std).astype(np.float32)
            w.setflags(write=False)
            return w

        self.w_in = mat(channels, d)
        self.blocks: tuple[BlockWeights, ...] = tuple(
            BlockWeights(
                self_attn=AttentionWeights(mat(d, d), mat(d, d), mat(d, d), mat(d, d)),
                cross_attn=AttentionWeights(mat(d, d), mat(d, d), mat(d, d), mat(d, d)),
                ff_in=mat(d, 4 * d),
                ff_out=mat(4 * d, d),
            )
            for _ in range(config.num_blocks)
        )
        self.w_out = mat(d, channels)
        self._null = null_prompt(d, config.embed_seed)

    def forward(
        self,
        latent: np.ndarray,
        t: int,
        part: RegionPartition,
        prompts: Mapping[int, LayerPrompt],
    ) -> np.ndarray:
        c, h, w = latent.shape
        if c != self.channels:
            raise DimensionMismatchError(f"expected {self.channels} channels, got {c}")
        if part.shape != (h, w):
            raise DimensionMismatchError(
                f"partition grid {part.shape} does not match latent ({h}, {w})"
            )
        if not np.isfinite(latent).all():
            raise NumericError("non-finite values in denoiser input")
        x = latent.reshape(c, h * w).T.astype(np.float32) @ self.w_in
        x = x + timestep_embedding(t, self.config.d_model)
        for k, bw in enumerate(self.blocks):
            x = x + masked_self_attention(layer_norm(x), part, bw.self_attn, self.config.num_heads)
            acts = BlockActivations(tokens=layer_norm(x), timestep=t, block=k)
            x = x + mqd_cross_attention(acts, part, prompts, bw.cross_attn, self.config.num_heads).tokens
            hmid = np.maximum(layer_norm(x) @ bw.ff_in, np.float32(0.0))
            x = x + hmid @ bw.ff_out
            if not np.isfinite(x).all():
                raise NumericError(f"non-finite activations after block {k}")
        y = layer_norm(x) @ self.w_out
        return y.T.reshape(c, h, w).astype(np.float32)

    def predict(
        self,
        latent: np.ndarray,
        t: int,
        part: RegionPartition,
        prompts: Mapping[int, LayerPrompt],
    ) -> np.ndarray:
        """Classifier-free-guided prediction; counts as one denoiser call.

        The unconditional branch routes every region to the reserved null
        prompt over the SAME partition, so region locality survives guidance.
        """
        cond = self.forward(latent, t, part, prompts)
        null_prompts = {owner: LayerPrompt(NULL_TOKEN, self._null) for owner in part.owners}
        uncond = self.forward(latent, t, part, null_prompts)
        return cfg_combine(uncond, cond, self.config.guidance_scale)


def _pattern_fields(label: str) -> dict:
    gen = stream("pattern", stable_token_id(label))
    return {
        "color": gen.uniform(-0.8, 0.8, 3).astype(np.float32),
        "stripes": bool(gen.random() < 0.5),
        "period": int(gen.integers(3, 8)),
        "phase": int(gen.integers(0, 3)),
        "ident": np.float32(gen.uniform(-1.0, 1.0)),
    }


def label_identity_value(label: str) -> float:
    """The constant written to channel 3 for this label's pattern."""
    return float(_pattern_fields(label)["ident"])


def procedural_pattern(
    label: str, t: int, num_steps: int, channels: int, height: int, width: int
) -> np.ndarray:
    """Full-grid pattern for one label: flat color plus stripe/dot texture in
    channels 0-2 (scaled by a fade-in over the first half of the schedule) and
    the label's identity constant in channel 3."""
    f = _pattern_fields(label)
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    if f["stripes"]:
        tex = np.where((xs + ys + f["phase"]) % f["period"] < f["period"] / 2, 1.0, -1.0)
    else:
        tex = np.where(
            ((xs + f["phase"]) % f["period"] == 0) & ((ys + f["phase"]) % f["period"] == 0),
            1.0,
            -1.0,
        )
    fade = np.float32(min(1.0, 2.0 * (num_steps - t) / num_steps))
    out = np.zeros((channels, height, width), dtype=np.float32)
    ncolor = min(3, channels)
    for ch in range(ncolor):
        out[ch] = np.clip(f["color"][ch] + 0.25 * tex, -1.0, 1.0) * fade
    if channels > 3:
        out[3] = f["ident"]
    return out


def procedural_predict(
    part: RegionPartition,
    prompts: Mapping[int, LayerPrompt],
    t: int,
    num_steps: int,
    channels: int,
    height: int,
    width: int,
) -> np.ndarray:
    """Per-region deterministic patterns keyed by each owner's label."""
    out = np.zeros((channels, height, width), dtype=np.float32)
    for owner, region in part.entries:
        if region.is_empty():
            continue
        pattern = procedural_pattern(
            prompts[owner].label, t, num_steps, channels, height, width
        )
        out = np.where(region.bits[None, :, :], pattern, out)
    return out.astype(np.float32)


class ProceduralDenoiser:
    """Deterministic pattern backend; ignores latent values and guidance."""

    name = "procedural"

    def __init__(self, channels: int, config: DenoiserConfig):
        self.channels = channels
        self.config = config

    def predict(
        self,
        latent: np.ndarray,
        t: int,
        part: RegionPartition,
        prompts: Mapping[int, LayerPrompt],
    ) -> np.ndarray:
        c, h, w = latent.shape
        if part.shape != (h, w):
            raise DimensionMismatchError(
                f"partition grid {part.shape} does not match latent ({h}, {w})"
            )
        return procedural_predict(part, prompts, t, self.config.num_steps, c, h, w)


BACKENDS = ("toy-dit", "procedural")


def make_denoiser(name: str, channels: int, config: DenoiserConfig) -> DenoiserBackend:
    if name == "toy-dit":
        return ToyDitDenoiser(channels, config)
    if name == "procedural":
        return ProceduralDenoiser(channels, config)
    raise DimensionMismatchError(f"unknown denoiser backend {name!r}; choose from {BACKENDS}")

"""Session orchestration: background creation, object edits, occluded-object
deletion, decoding, persistence, and deterministic replay.

A session owns one layer memory, one denoiser backend, an append-only edit
log (the replay script), and per-edit cost reports. Edits are strictly
serialized per session; rendering is a pure read of the latest snapshot.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .denoiser import (
    DenoiserConfig,
    LayerPrompt,
    embed_prompt,
    make_denoiser,
    scheduler_step,
)
from .errors import DimensionMismatchError, LayerLookupError, MaskEditError
from .guidance import (
    CostReport,
    MODE_BCG,
    masked_blend,
    run_background_denoise,
    run_edit_denoise,
)
from .masks import Mask, partition
from .memory import LayerMemory, LayerRecord

MANIFEST_NAME = "manifest.json"
BLOB_DIR = "blobs"
IMAGE_NAME = "image.png"
MANIFEST_FORMAT = "maskedit-session-v1"


@dataclass(frozen=True)
class SessionConfig:
    channels: int = 4
    latent_height: int = 32
    latent_width: int = 32
    decode_scale: int = 8
    backend: str = "toy-dit"
    seed: int = 0
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)

    def __post_init__(self):
        if self.channels < 3:
            raise DimensionMismatchError("need >= 3 channels for RGB decoding")
        if self.decode_scale < 1:
            raise DimensionMismatchError("decode scale must be >= 1")

    @property
    def image_height(self) -> int:
        return self.latent_height * self.decode_scale

    @property
    def image_width(self) -> int:
        return self.latent_width * self.decode_scale

    def to_dict(self) -> dict:
        return {
            "channels": self.channels,
            "latent_height": self.latent_height,
            "latent_width": self.latent_width,
            "decode_scale": self.decode_scale,
            "backend": self.backend,
            "seed": self.seed,
            "denoiser": {
                "num_blocks": self.denoiser.num_blocks,
                "d_model": self.denoiser.d_model,
                "num_heads": self.denoiser.num_heads,
                "num_steps": self.denoiser.num_steps,
                "guidance_scale": self.denoiser.guidance_scale,
                "weight_seed": self.denoiser.weight_seed,
                "embed_seed": self.denoiser.embed_seed,
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SessionConfig":
        den = payload.get("denoiser", {})
        return cls(
            channels=int(payload.get("channels", 4)),
            latent_height=int(payload.get("latent_height", 32)),
            latent_width=int(payload.get("latent_width", 32)),
            decode_scale=int(payload.get("decode_scale", 8)),
            backend=str(payload.get("backend", "toy-dit")),
            seed=int(payload.get("seed", 0)),
            denoiser=DenoiserConfig(
                num_blocks=int(den.get("num_blocks", 4)),
                d_model=int(den.get("d_model", 64)),
                num_heads=int(den.get("num_heads", 4)),
                num_steps=int(den.get("num_steps", 20)),
                guidance_scale=float(den.get("guidance_scale", 7.5)),
                weight_seed=int(den.get("weight_seed", 0)),
                embed_seed=int(den.get("embed_seed", 0)),
            ),
        )


@dataclass(frozen=True)
class RgbImage:
    pixels: np.ndarray  # (H, W, 3) uint8

    def __post_init__(self):
        pixels = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.uint8))
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise DimensionMismatchError(f"image must be (H,W,3), got {pixels.shape}")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.pixels.shape, dtype=np.int64).tobytes())
        h.update(self.pixels.tobytes())
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RgbImage):
            return NotImplemented
        return bool(np.array_equal(self.pixels, other.pixels))


def decode_latent(latent: np.ndarray, scale: int = 8) -> RgbImage:
    """Fixed affine decode: channels 0-2 -> RGB via clamp((v+1)/2) * 255 with
    round-half-up, then nearest-neighbor upscale."""
    if latent.ndim != 3 or latent.shape[0] < 3:
        raise DimensionMismatchError(
            f"decoding needs a (C>=3, H, W) latent, got shape {latent.shape}"
        )
    unit = np.clip((latent[:3].astype(np.float64) + 1.0) / 2.0, 0.0, 1.0)
    samples = np.floor(unit * 255.0 + 0.5).astype(np.uint8)
    pixels = samples.transpose(1, 2, 0)
    if scale > 1:
        pixels = np.repeat(np.repeat(pixels, scale, axis=0), scale, axis=1)
    return RgbImage(pixels=pixels)


def _deletion_resume_step(num_steps: int) -> int:
    return math.ceil(0.4 * num_steps)


class EditSession:
    """One editing canvas: background plus an ordered stack of masked edits."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.memory = LayerMemory()
        self.edit_log: list[dict] = []
        self.stats: list[CostReport] = []
        self.backend = make_denoiser(config.backend, config.channels, config.denoiser)

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def create(
        cls, background_prompt: str, seed: int | None = None,
        config: SessionConfig | None = None,
    ) -> "EditSession":
        """New session whose layer 0 is a full-canvas denoise of the prompt."""
        config = config or SessionConfig()
        if seed is not None:
            config = replace(config, seed=seed)
        session = cls(config)
        record, report = run_background_denoise(
            background_prompt,
            session.backend,
            config.denoiser,
            config.channels,
            config.latent_height,
            config.latent_width,
            config.seed,
        )
        session.memory.append(record)
        session.stats.append(report)
        session.edit_log.append({"op": "create", "prompt": background_prompt})
        return session

    # -- editing -----------------------------------------------------------

    def add_edit(self, prompt: str, mask: Mask) -> RgbImage:
        """Append a masked edit; later masks occlude earlier ones."""
        record, report = run_edit_denoise(
            self.memory,
            prompt,
            mask,
            self.backend,
            self.config.denoiser,
            self.config.seed,
            mode=MODE_BCG,
        )
        self.memory.append(record)
        self.stats.append(report)
        self.edit_log.append({"op": "edit", "prompt": prompt, "mask": mask.to_rle()})
        return self.render()

    def delete_edit(self, target: int) -> RgbImage:
        """Remove layer ``target`` (never the background).

        Topmost layer: memory already holds the exact prior state, so it is
        restored directly with no denoising. Occluded layer: resume denoising
        from an intermediate step over a partition that excludes the target,
        blending against the layer below it for the first half of the resumed
        steps, then plain steps.
        """
        started = time.perf_counter()
        n = len(self.memory)
        if target == 0:
            raise LayerLookupError("background layer (index 0) cannot be deleted")
        if not 1 <= target < n:
            raise LayerLookupError(f"layer index {target} out of range 1..{n - 1}")

        if target == n - 1:
            self.memory.remove(target)
            calls = 0
        else:
            calls = self._delete_occluded(target)

        self.stats.append(
            CostReport(
                mode="delete",
                layer_index=target,
                denoiser_calls=calls,
                omega=calls * self.config.denoiser.num_blocks,
                forward_cost=0,
                wall_ms=(time.perf_counter() - started) * 1000.0,
            )
        )
        self.edit_log.append({"op": "delete", "layer": target})
        return self.render()

    def _delete_occluded(self, target: int) -> int:
        """Erase a layer sitting behind the top one; returns denoiser calls."""
        steps = self.config.denoiser.num_steps
        resume = _deletion_resume_step(steps)
        blend_until = math.ceil(resume / 2)

        top_index = len(self.memory) - 1
        top = self.memory.record(top_index)
        below = self.memory.record(target - 1)
        m_top = top.mask

        remaining = [
            self.memory.record(j) for j in range(len(self.memory)) if j != target
        ]
        part = partition([rec.mask for rec in remaining])
        prompts = {
            j: LayerPrompt(rec.label, rec.prompt) for j, rec in enumerate(remaining)
        }

        trajectory: list[np.ndarray] = [None] * (steps + 1)  # type: ignore[list-item]
        # Levels above the resume point keep the foreground and revert the
        # rest to the state below the target.
        for t in range(steps, resume - 1, -1):
            trajectory[t] = masked_blend(top.trajectory[t], below.trajectory[t], m_top)
        z = trajectory[resume]
        calls = 0
        for t in range(resume, 0, -1):
            pred = self.backend.predict(z, t, part, prompts)
            calls += 1
            z = scheduler_step(z, pred, t, steps)
            if t > blend_until:
                z = masked_blend(z, below.trajectory[t - 1], m_top)
            trajectory[t - 1] = z

        new_top = LayerRecord(
            label=top.label, prompt=top.prompt, trajectory=tuple(trajectory), mask=top.mask
        )
        self.memory.remove(target)
        self.memory.replace_last(new_top)
        return calls

    # -- reads ---------------------------------------------------------------

    def render(self) -> RgbImage:
        if len(self.memory) == 0:
            raise LayerLookupError("session has no layers to render")
        final = self.memory.latent_at(len(self.memory) - 1, 0)
        return decode_latent(final, self.config.decode_scale)

    def layer_labels(self) -> list[str]:
        return [rec.label for rec in self.memory.snapshot()]

    # -- persistence -----------------------------------------------------------

    def save(self, directory) -> Path:
        """Write the manifest (config, edit log, stats) plus one little-endian
        float32 blob per (layer, timestep) and the current render."""
        directory = Path(directory)
        blob_dir = directory / BLOB_DIR
        blob_dir.mkdir(parents=True, exist_ok=True)
        records = self.memory.snapshot()
        layers_meta = []
        for i, rec in enumerate(records):
            for t, z in enumerate(rec.trajectory):
                path = blob_dir / f"layer{i:03d}_t{t:03d}.bin"
                path.write_bytes(np.ascontiguousarray(z, dtype="<f4").tobytes())
            layers_meta.append({"label": rec.label, "mask": rec.mask.to_rle()})
        manifest = {
            "format": MANIFEST_FORMAT,
            "config": self.config.to_dict(),
            "edit_log": self.edit_log,
            "layers": layers_meta,
            "stats": [r.to_dict() for r in self.stats],
            "image_checksum": self.render().checksum(),
        }
        (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))
        (directory / IMAGE_NAME).write_bytes(self.render().to_png_bytes())
        return directory

    @classmethod
    def load(cls, directory) -> "EditSession":
        """Rebuild a session from its manifest and blobs (no recomputation)."""
        directory = Path(directory)
        manifest = json.loads((directory / MANIFEST_NAME).read_text())
        if manifest.get("format") != MANIFEST_FORMAT:
            raise MaskEditError(f"unrecognized session format in {directory}")
        config = SessionConfig.from_dict(manifest["config"])
        session = cls(config)
        steps = config.denoiser.num_steps
        shape = (config.channels, config.latent_height, config.latent_width)
        for i, meta in enumerate(manifest["layers"]):
            trajectory = []
            for t in range(steps + 1):
                raw = (directory / BLOB_DIR / f"layer{i:03d}_t{t:03d}.bin").read_bytes()
                trajectory.append(np.frombuffer(raw, dtype="<f4").reshape(shape).copy())
            record = LayerRecord(
                label=meta["label"],
                prompt=embed_prompt(meta["label"], config.denoiser.d_model,
                                    config.denoiser.embed_seed),
                trajectory=tuple(trajectory),
                mask=Mask.from_rle(meta["mask"]),
            )
            session.memory.append(record)
        session.edit_log = list(manifest["edit_log"])
        return session

    @classmethod
    def replay(cls, directory) -> "EditSession":
        """Re-execute a saved session's edit log from scratch."""
        directory = Path(directory)
        manifest = json.loads((directory / MANIFEST_NAME).read_text())
        if manifest.get("format") != MANIFEST_FORMAT:
            raise MaskEditError(f"unrecognized session format in {directory}")
        config = SessionConfig.from_dict(manifest["config"])
        return cls.replay_log(manifest["edit_log"], config)

    @classmethod
    def replay_log(cls, edit_log: list[dict], config: SessionConfig) -> "EditSession":
        session: EditSession | None = None
        for entry in edit_log:
            op = entry["op"]
            if op == "create":
                session = cls.create(entry["prompt"], config=config)
            elif op == "edit":
                if session is None:
                    raise MaskEditError("edit before create in edit log")
                session.add_edit(entry["prompt"], Mask.from_rle(entry["mask"]))
            elif op == "delete":
                if session is None:
                    raise MaskEditError("delete before create in edit log")
                session.delete_edit(int(entry["layer"]))
            else:
                raise MaskEditError(f"unknown edit-log op {op!r}")
        if session is None:
            raise MaskEditError("edit log contains no create entry")
        return session

"""Layer-wise editing memory.

One record per editing step: the prompt embedding that drove it, the full
per-timestep latent trajectory, and the region mask. Record 0 is the
background (all-ones mask). Records are immutable after append; the memory
list itself is restructured only by deletion.

Stored latents are the post-blend values at each timestep, which is what
makes background preservation exact by construction downstream.

Memory is single-writer per session; `snapshot()` hands concurrent readers
an immutable view. An optional spill threshold moves old trajectories to
disk once the in-RAM total passes it (reads are transparent).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, LayerLookupError, NumericError
from .masks import Mask

_HEADER_BYTES = 64  # bookkeeping constant per memory / per record
_TOKEN_ID_BYTES = 8


@dataclass(frozen=True)
class PromptEmbedding:
    """Token ids plus one d_model row per token; a pure function of (text, seed)."""

    tokens: tuple[int, ...]
    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float32))
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.tokens):
            raise DimensionMismatchError(
                f"embedding rows {vectors.shape} do not match {len(self.tokens)} tokens"
            )

    @property
    def d_model(self) -> int:
        return self.vectors.shape[1]

    def nbytes(self) -> int:
        return self.vectors.nbytes + _TOKEN_ID_BYTES * len(self.tokens)


@dataclass(frozen=True)
class LayerRecord:
    """One editing step: prompt, trajectory over t = 0..T, mask, source text."""

    label: str
    prompt: PromptEmbedding
    trajectory: tuple[np.ndarray, ...]
    mask: Mask

    def __post_init__(self):
        frozen = []
        for t, z in enumerate(self.trajectory):
            z = np.ascontiguousarray(np.asarray(z, dtype=np.float32))
            if z.ndim != 3:
                raise DimensionMismatchError(
                    f"latent at t={t} must be (C,H,W), got shape {z.shape}"
                )
            if not np.isfinite(z).all():
                raise NumericError(f"non-finite latent at t={t} in record {self.label!r}")
            z.setflags(write=False)
            frozen.append(z)
        object.__setattr__(self, "trajectory", tuple(frozen))
        shapes = {z.shape for z in self.trajectory}
        if len(shapes) != 1:
            raise DimensionMismatchError(f"trajectory tensors disagree on shape: {shapes}")
        c, h, w = self.latent_shape
        if self.mask.shape != (h, w):
            raise DimensionMismatchError(
                f"mask {self.mask.shape} does not match latent grid ({h}, {w})"
            )

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        return self.trajectory[0].shape

    @property
    def num_steps(self) -> int:
        return len(self.trajectory) - 1

    def nbytes(self) -> int:
        return (
            _HEADER_BYTES
            + sum(z.nbytes for z in self.trajectory)
            + self.prompt.nbytes()
            + self.mask.bits.nbytes
        )


def record_checksum(record: LayerRecord) -> str:
    """Content hash over everything a record stores (for immutability checks)."""
    h = hashlib.sha256()
    h.update(record.label.encode("utf-8"))
    h.update(np.asarray(record.prompt.tokens, dtype=np.int64).tobytes())
    h.update(record.prompt.vectors.tobytes())
    h.update(record.mask.bits.tobytes())
    for z in record.trajectory:
        h.update(z.tobytes())
    return h.hexdigest()


class _Slot:
    """Holds a record in RAM or its trajectory spilled to one .npy file."""

    __slots__ = ("record", "spill_path", "meta")

    def __init__(self, record: LayerRecord):
        self.record = record
        self.spill_path: Path | None = None
        self.meta: tuple | None = None

    def spill(self, path: Path) -> None:
        if self.spill_path is not None:
            return
        stacked = np.stack(self.record.trajectory)
        np.save(path, stacked)
        self.meta = (self.record.label, self.record.prompt, self.record.mask)
        self.spill_path = path
        self.record = None  # type: ignore[assignment]

    def load(self) -> LayerRecord:
        if self.spill_path is None:
            return self.record
        stacked = np.load(self.spill_path)
        label, prompt, mask = self.meta
        return LayerRecord(label, prompt, tuple(stacked), mask)

    def latent_at(self, t: int) -> np.ndarray:
        if self.spill_path is None:
            return self.record.trajectory[t]
        stacked = np.load(self.spill_path, mmap_mode="r")
        z = np.ascontiguousarray(np.asarray(stacked[t], dtype=np.float32))
        z.setflags(write=False)
        return z

    def nbytes(self) -> int:
        rec = self.record if self.spill_path is None else None
        if rec is not None:
            return rec.nbytes()
        label, prompt, mask = self.meta
        stacked = np.load(self.spill_path, mmap_mode="r")
        return (
            _HEADER_BYTES
            + int(stacked.dtype.itemsize * stacked.size)
            + prompt.nbytes()
            + mask.bits.nbytes
        )


class LayerMemory:
    """Ordered editing history; index 0 is the background layer."""

    def __init__(self, spill_threshold: int | None = None, spill_dir=None):
        self._slots: list[_Slot] = []
        self._spill_threshold = spill_threshold
        self._spill_dir = Path(spill_dir) if spill_dir is not None else None
        self._spill_counter = 0

    def __len__(self) -> int:
        return len(self._slots)

    def append(self, record: LayerRecord) -> int:
        """Append a record; returns its layer index."""
        if self._slots:
            first = self._slots[0]
            ref_shape = (
                first.record.latent_shape
                if first.spill_path is None
                else self.record(0).latent_shape
            )
            if record.latent_shape != ref_shape:
                raise DimensionMismatchError(
                    f"record latents {record.latent_shape} do not match session {ref_shape}"
                )
            if record.num_steps != self.num_steps:
                raise DimensionMismatchError(
                    f"record has {record.num_steps} steps, session uses {self.num_steps}"
                )
        else:
            if not record.mask.is_full():
                raise DimensionMismatchError("background record must carry an all-ones mask")
        self._slots.append(_Slot(record))
        self._maybe_spill()
        return len(self._slots) - 1

    def record(self, i: int) -> LayerRecord:
        self._check_index(i)
        return self._slots[i].load()

    def latent_at(self, i: int, t: int) -> np.ndarray:
        """The exact stored tensor for layer i at timestep t; never recomputed."""
        self._check_index(i)
        if not 0 <= t <= self.num_steps:
            raise LayerLookupError(f"timestep {t} out of range 0..{self.num_steps}")
        return self._slots[i].latent_at(t)

    def remove(self, i: int) -> LayerRecord:
        """Drop layer i (never the background); later records shift down."""
        self._check_index(i)
        if i == 0:
            raise LayerLookupError("background layer (index 0) cannot be removed")
        return self._slots.pop(i).load()

    def replace_last(self, record: LayerRecord) -> None:
        """Swap the top record for an updated one (deletion rebuilds it)."""
        if not self._slots:
            raise LayerLookupError("memory is empty")
        old_shape = self.record(len(self._slots) - 1).latent_shape
        if record.latent_shape != old_shape:
            raise DimensionMismatchError(
                f"replacement latents {record.latent_shape} do not match {old_shape}"
            )
        self._slots[-1] = _Slot(record)

    def snapshot(self) -> tuple[LayerRecord, ...]:
        return tuple(slot.load() for slot in self._slots)

    def masks(self) -> list[Mask]:
        return [self.record(i).mask for i in range(len(self._slots))]

    @property
    def num_steps(self) -> int:
        if not self._slots:
            raise LayerLookupError("memory is empty")
        return self.record(0).num_steps

    def footprint(self) -> int:
        """Logical storage in bytes; strictly increasing in record count."""
        return _HEADER_BYTES + sum(slot.nbytes() for slot in self._slots)

    def _check_index(self, i: int) -> None:
        if not 0 <= i < len(self._slots):
            raise LayerLookupError(f"layer index {i} out of range 0..{len(self._slots) - 1}")

    def _maybe_spill(self) -> None:
        if self._spill_threshold is None or self._spill_dir is None:
            return
        in_ram = sum(s.record.nbytes() for s in self._slots if s.spill_path is None)
        # Keep the newest record in RAM; spill from the oldest up.
        for slot in self._slots[:-1]:
            if in_ram <= self._spill_threshold:
                break
            if slot.spill_path is None:
                size = slot.record.nbytes()
                self._spill_dir.mkdir(parents=True, exist_ok=True)
                slot.spill(self._spill_dir / f"spill_{self._spill_counter:05d}.npy")
                self._spill_counter += 1
                in_ram -= size

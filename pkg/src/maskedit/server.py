"""HTTP service exposing edit sessions to the UI and automation.

Sessions live in an in-process registry. Each session has a single-writer
lock: a second concurrent edit on the same session gets 409 rather than
interleaving. GET endpoints never mutate; images are content-addressed and
fetched by reference so edit responses stay small.

Masks upload as RLE or base64 PNG, at latent resolution (used as-is) or at
image resolution (downsampled server-side; the original raster is kept and
served back verbatim from /layers).
"""

from __future__ import annotations

import base64
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import MaskEditError
from .masks import Mask, downsample_mask, upsample_mask
from .session import EditSession, SessionConfig


class MaskPayload(BaseModel):
    width: Optional[int] = None
    height: Optional[int] = None
    runs: Optional[list[int]] = None
    png_base64: Optional[str] = None


class CreateSessionRequest(BaseModel):
    background_prompt: str
    seed: int = 0
    config: dict = {}


class EditRequest(BaseModel):
    prompt: str
    mask: MaskPayload


@dataclass
class SessionEntry:
    session: EditSession
    lock: threading.Lock = field(default_factory=threading.Lock)
    created_at: str = ""
    upload_masks: dict[int, Mask] = field(default_factory=dict)
    current_ref: str = ""


class ApiError(MaskEditError):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _decode_mask(payload: MaskPayload) -> Mask:
    if payload.png_base64 is not None:
        return Mask.from_image_bytes(base64.b64decode(payload.png_base64))
    if payload.runs is None or payload.width is None or payload.height is None:
        raise ApiError(422, "mask needs either png_base64 or width/height/runs")
    return Mask.from_rle(
        {"width": payload.width, "height": payload.height, "runs": payload.runs}
    )


class ServiceState:
    def __init__(self, default_config: SessionConfig):
        self.default_config = default_config
        self.sessions: dict[str, SessionEntry] = {}
        self.images: dict[str, bytes] = {}
        self.registry_lock = threading.Lock()

    def entry(self, session_id: str) -> SessionEntry:
        entry = self.sessions.get(session_id)
        if entry is None:
            raise ApiError(404, f"unknown session {session_id}")
        return entry

    def store_image(self, entry: SessionEntry) -> str:
        image = entry.session.render()
        ref = image.checksum()
        with self.registry_lock:
            self.images.setdefault(ref, image.to_png_bytes())
        entry.current_ref = ref
        return ref

    def resolve_mask(self, entry: SessionEntry, payload: MaskPayload) -> tuple[Mask, Mask]:
        """Returns (latent-resolution mask, as-uploaded raster)."""
        uploaded = _decode_mask(payload)
        config = entry.session.config
        latent_dims = (config.latent_height, config.latent_width)
        image_dims = (config.image_height, config.image_width)
        if uploaded.shape == latent_dims:
            return uploaded, uploaded
        if uploaded.shape == image_dims:
            return downsample_mask(uploaded, *latent_dims), uploaded
        raise ApiError(
            422,
            f"mask {uploaded.shape} matches neither latent {latent_dims} "
            f"nor image {image_dims} dims",
        )


def create_app(default_config: SessionConfig | None = None) -> FastAPI:
    state = ServiceState(default_config or SessionConfig())
    app = FastAPI(title="maskedit", version="0.1.0")
    app.state.service = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(MaskEditError)
    async def engine_error_handler(request, exc: MaskEditError):
        status = exc.status if isinstance(exc, ApiError) else 422
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(state.sessions)}

    @app.post("/sessions")
    def create_session(request: CreateSessionRequest):
        base = state.default_config.to_dict()
        base_denoiser = base.pop("denoiser")
        overrides = dict(request.config)
        denoiser_overrides = overrides.pop("denoiser", {})
        base.update(overrides)
        base_denoiser.update(denoiser_overrides)
        base["denoiser"] = base_denoiser
        base["seed"] = request.seed
        config = SessionConfig.from_dict(base)
        session = EditSession.create(request.background_prompt, config=config)
        entry = SessionEntry(
            session=session,
            created_at=datetime.now(timezone.utc).isoformat(),
        )
        entry.upload_masks[0] = upsample_mask(
            session.memory.record(0).mask, config.decode_scale
        )
        session_id = uuid.uuid4().hex[:12]
        with state.registry_lock:
            state.sessions[session_id] = entry
        ref = state.store_image(entry)
        return {
            "id": session_id,
            "created_at": entry.created_at,
            "config": config.to_dict(),
            "image_ref": ref,
        }

    @app.post("/sessions/{session_id}/edits")
    def add_edit(session_id: str, request: EditRequest):
        entry = state.entry(session_id)
        if not request.prompt.strip():
            raise ApiError(422, "prompt must be non-empty")
        latent_mask, uploaded = state.resolve_mask(entry, request.mask)
        if not entry.lock.acquire(blocking=False):
            raise ApiError(409, "an edit is already running on this session")
        try:
            entry.session.add_edit(request.prompt, latent_mask)
            layer_index = len(entry.session.memory) - 1
            entry.upload_masks[layer_index] = uploaded
            ref = state.store_image(entry)
            cost = entry.session.stats[-1].to_dict()
        finally:
            entry.lock.release()
        return {"layer_index": layer_index, "image_ref": ref, "cost": cost}

    @app.delete("/sessions/{session_id}/edits/{layer_index}")
    def delete_edit(session_id: str, layer_index: int):
        entry = state.entry(session_id)
        if not entry.lock.acquire(blocking=False):
            raise ApiError(409, "an edit is already running on this session")
        try:
            entry.session.delete_edit(layer_index)
            uploads = entry.upload_masks
            n = len(entry.session.memory)
            entry.upload_masks = {
                i: uploads[i if i < layer_index else i + 1] for i in range(n)
            }
            ref = state.store_image(entry)
            cost = entry.session.stats[-1].to_dict()
        finally:
            entry.lock.release()
        return {"image_ref": ref, "cost": cost}

    @app.get("/sessions/{session_id}/image")
    def get_image(session_id: str):
        entry = state.entry(session_id)
        return Response(content=state.images[entry.current_ref], media_type="image/png")

    @app.get("/images/{ref}")
    def get_image_by_ref(ref: str):
        data = state.images.get(ref)
        if data is None:
            raise ApiError(404, f"unknown image {ref}")
        return Response(content=data, media_type="image/png")

    @app.get("/sessions/{session_id}/layers")
    def get_layers(session_id: str):
        entry = state.entry(session_id)
        layers = []
        for i, record in enumerate(entry.session.memory.snapshot()):
            uploaded = entry.upload_masks.get(i)
            layers.append(
                {
                    "index": i,
                    "label": record.label,
                    "mask": (uploaded or record.mask).to_rle(),
                    "latent_mask": record.mask.to_rle(),
                }
            )
        return {"layers": layers}

    @app.get("/sessions/{session_id}/stats")
    def get_stats(session_id: str):
        entry = state.entry(session_id)
        return {"reports": [r.to_dict() for r in entry.session.stats]}

    return app

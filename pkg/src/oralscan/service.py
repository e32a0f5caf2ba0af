"""HTTP inference API: stateless screening endpoints over a loaded checkpoint.

The model is loaded once and shared read-only across request handlers; uploads
are never persisted.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import imaging
from .network import CLASS_NAMES, predict
from .trainer import Checkpoint

MAX_UPLOAD_BYTES = 25 * 1024 * 1024


class InputGeometry(BaseModel):
    width: int
    height: int


class PredictResponse(BaseModel):
    label: str
    confidence: float
    distribution: list[float]
    model_digest: str
    input_geometry: InputGeometry


class HealthResponse(BaseModel):
    status: str
    model_digest: Optional[str] = None


class ModelCard(BaseModel):
    model_digest: str
    classes: list[str]
    input_side: int
    config: dict
    training: dict


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(checkpoint: Optional[Checkpoint] = None, cors: bool = False) -> FastAPI:
    """Build the app; a missing checkpoint makes every endpoint answer 503."""
    app = FastAPI(title="oralscan", docs_url="/api/docs", openapi_url="/api/openapi.json")
    app.state.checkpoint = checkpoint

    if cors:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.get("/api/health")
    def health():
        ckpt: Optional[Checkpoint] = app.state.checkpoint
        if ckpt is None:
            return _error(503, "model not ready")
        return HealthResponse(status="ok", model_digest=ckpt.digest)

    @app.get("/api/model")
    def model_card():
        ckpt: Optional[Checkpoint] = app.state.checkpoint
        if ckpt is None:
            return _error(503, "model not ready")
        return ModelCard(
            model_digest=ckpt.digest,
            classes=list(CLASS_NAMES),
            input_side=ckpt.model.config.input_size,
            config=ckpt.model.config.to_dict(),
            training=ckpt.metadata,
        )

    @app.post("/api/predict")
    async def predict_image(request: Request):
        ckpt: Optional[Checkpoint] = app.state.checkpoint
        if ckpt is None:
            return _error(503, "model not ready")
        content_type = request.headers.get("content-type", "")
        if not content_type.startswith("multipart/form-data"):
            return _error(415, "expected multipart/form-data with an 'image' field")
        declared = request.headers.get("content-length")
        if declared and declared.isdigit() and int(declared) > MAX_UPLOAD_BYTES:
            return _error(400, f"upload too large (limit {MAX_UPLOAD_BYTES} bytes)")
        body = await request.body()
        if len(body) > MAX_UPLOAD_BYTES:
            return _error(400, f"upload too large (limit {MAX_UPLOAD_BYTES} bytes)")
        try:
            form = await request.form()
        except Exception:
            return _error(400, "unreadable multipart body")
        upload = form.get("image")
        if upload is None or isinstance(upload, str):
            return _error(400, "missing 'image' file field")
        data = await upload.read()

        tier = None
        tier_field = form.get("tier")
        if tier_field is not None and str(tier_field) != "":
            try:
                tier = imaging.ResolutionTier.from_height(int(str(tier_field).lstrip("Rr")))
            except ValueError:
                return _error(400, f"unknown tier {tier_field!r}")

        try:
            img = imaging.decode(data)
        except imaging.ImageError as exc:
            return _error(400, f"undecodable image: {exc}")

        received = InputGeometry(width=img.width, height=img.height)
        if tier is not None:
            img = imaging.degrade_to_tier(img, tier)
        tensor = imaging.to_input_tensor(img, ckpt.model.config.input_size)
        pred = predict(ckpt.model, tensor)
        return PredictResponse(
            label=pred.label.wire_name,
            confidence=pred.confidence,
            distribution=list(pred.distribution),
            model_digest=ckpt.digest,
            input_geometry=received,
        )

    return app

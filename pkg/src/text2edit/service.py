"""Stateless HTTP inference service.

Models load once into a read-only registry; every request is independent,
so iterative editing chains client-side by resubmitting response images.
Errors always carry a machine-readable code; internal failures return an
opaque id whose details go to the server log only.
"""

from __future__ import annotations

import base64
import binascii
import io
import logging
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image

from .backbone import resize_for_model, resize_to
from .errors import ValidationError
from .generators import FilterBankGenerator, probe_filter
from .models import ModelBundle, apply_edit, load_model

logger = logging.getLogger(__name__)

IDENTITY_MODEL_ID = "identity"


@dataclass(frozen=True)
class RegisteredModel:
    """One servable model: a loaded bundle, or the built-in identity stub."""

    id: str
    kind: str
    branches: int
    bundle: ModelBundle | None = None

    @property
    def is_identity(self) -> bool:
        return self.bundle is None


def identity_model(model_id: str = IDENTITY_MODEL_ID) -> RegisteredModel:
    """A no-op model: returns its input image unchanged. Useful for
    wiring tests and UI development without a checkpoint."""
    return RegisteredModel(id=model_id, kind="identity", branches=0, bundle=None)


def registered_from_checkpoint(model_id: str, path: str | Path) -> RegisteredModel:
    bundle = load_model(path)
    branches = bundle.config.branches if bundle.kind in ("bucket", "filterbank") else 0
    return RegisteredModel(id=model_id, kind=bundle.kind, branches=branches, bundle=bundle)


def build_registry(
    checkpoints: dict[str, str | Path] | None = None, include_identity: bool = True
) -> dict[str, RegisteredModel]:
    registry: dict[str, RegisteredModel] = {}
    if include_identity:
        registry[IDENTITY_MODEL_ID] = identity_model()
    for model_id, path in (checkpoints or {}).items():
        registry[model_id] = registered_from_checkpoint(model_id, path)
    return registry


def decode_image_bytes(data: bytes) -> np.ndarray:
    """Decode an encoded raster to a float image in [0,1]; never trusts input."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
            return np.asarray(rgb, dtype=np.float32) / 255.0
    except Exception as exc:
        raise ValidationError(f"image payload does not decode: {exc}") from exc


def encode_image_png(image: np.ndarray) -> bytes:
    levels = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(levels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message, **extra}})


def _decode_base64(payload: str) -> bytes:
    try:
        return base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ValidationError(f"invalid base64 image payload: {exc}") from exc


async def _read_edit_request(request: Request) -> dict:
    """Accept either multipart form data or a base64 JSON body."""
    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        upload = form.get("image")
        if upload is None:
            raise ValidationError("multipart request is missing the image part")
        raw = await upload.read() if hasattr(upload, "read") else str(upload).encode()
        return {
            "image_bytes": raw,
            "text": str(form.get("text", "")),
            "model": str(form.get("model", "")),
            "mode": str(form.get("mode", "fusion")),
            "return_weights": str(form.get("return_weights", "true")).lower() != "false",
            "k": form.get("k"),
        }
    body = await request.json()
    if not isinstance(body, dict):
        raise ValidationError("request body must be a JSON object")
    options = body.get("options") or {}
    image_b64 = body.get("image_base64", "")
    if not isinstance(image_b64, str) or not image_b64:
        raise ValidationError("image_base64 must be a non-empty string")
    return {
        "image_bytes": _decode_base64(image_b64),
        "text": body.get("text", ""),
        "model": body.get("model", ""),
        "mode": options.get("mode", "fusion"),
        "return_weights": bool(options.get("return_weights", True)),
        "k": body.get("k"),
    }


def create_app(
    registry: dict[str, RegisteredModel] | None = None, deterministic: bool = False
) -> FastAPI:
    """Build the service around a read-only model registry.

    With ``deterministic`` set, reported timings are zeroed so identical
    requests produce byte-identical responses.
    """
    models = registry if registry is not None else build_registry()
    app = FastAPI(title="text2edit service")

    @app.exception_handler(Exception)
    async def _internal(request: Request, exc: Exception):
        error_id = uuid.uuid4().hex
        logger.exception("internal error %s on %s", error_id, request.url.path)
        return _error(500, "internal", "internal error; see server log", id=error_id)

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    @app.get("/models")
    async def list_models():
        return [
            {"id": m.id, "kind": m.kind, "K": m.branches}
            for m in sorted(models.values(), key=lambda m: m.id)
        ]

    @app.post("/edit")
    async def edit(request: Request):
        try:
            req = await _read_edit_request(request)
        except ValidationError as exc:
            return _error(400, "invalid_image", str(exc))
        model = models.get(req["model"])
        if model is None:
            return _error(404, "unknown_model", f"no model named {req['model']!r}")
        text = str(req["text"]).strip()
        if not text:
            return _error(400, "invalid_text", "instruction text must be non-empty")
        if req["mode"] not in ("fusion", "argmax"):
            return _error(400, "invalid_mode", f"unknown mode {req['mode']!r}")
        try:
            image = decode_image_bytes(req["image_bytes"])
        except ValidationError as exc:
            return _error(400, "invalid_image", str(exc))
        t0 = time.perf_counter()
        if model.is_identity:
            edited, weights = image, None
        else:
            try:
                edited, weights = apply_edit(model.bundle, image, text, mode=req["mode"])
            except ValidationError as exc:
                return _error(400, "invalid_text", str(exc))
        millis = 0.0 if deterministic else (time.perf_counter() - t0) * 1000.0
        weights_out = None
        if req["return_weights"] and weights is not None:
            weights_out = [float(w) for w in weights]
        return {
            "image_base64": base64.b64encode(encode_image_png(edited)).decode("ascii"),
            "weights": weights_out,
            "model": model.id,
            "milliseconds": millis,
        }

    @app.post("/probe")
    async def probe(request: Request):
        try:
            req = await _read_edit_request(request)
        except ValidationError as exc:
            return _error(400, "invalid_image", str(exc))
        model = models.get(req["model"])
        if model is None:
            return _error(404, "unknown_model", f"no model named {req['model']!r}")
        if model.is_identity or not isinstance(
            model.bundle.generator, FilterBankGenerator
        ):
            return _error(400, "not_filterbank", f"model {model.id!r} has no filter bank")
        try:
            k = int(req["k"])
        except (TypeError, ValueError):
            return _error(400, "invalid_filter_index", "k must be an integer")
        if not 0 <= k < model.branches:
            return _error(400, "invalid_filter_index", f"k must lie in 0..{model.branches - 1}")
        try:
            image = decode_image_bytes(req["image_bytes"])
        except ValidationError as exc:
            return _error(400, "invalid_image", str(exc))
        resized, original = resize_for_model(image, multiple=model.bundle.spatial_multiple)
        out = resize_to(probe_filter(model.bundle.generator, resized, k), original)
        return {
            "image_base64": base64.b64encode(encode_image_png(out)).decode("ascii"),
            "model": model.id,
            "k": k,
        }

    return app

"""Wire-protocol HTTP surface.

    POST /v1/masks   {"image": <base64 PNG>, "prompts": [str, ...]}
                  -> {"width": W, "height": H,
                      "masks": [<base64 float32 LE row-major>, ...]}
    POST /v1/embed   {"image": <base64 PNG>}
                  -> {"dim": D, "values": [float, ...]}
    GET  /v1/health  -> {"status": "ok", "backend": name}

Errors are returned as HTTP 4xx/5xx with body {"error": "<message>"}.
"""

from __future__ import annotations

import base64
import binascii
import io
import threading

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel


class MasksRequest(BaseModel):
    image: str
    prompts: list[str]


class EmbedRequest(BaseModel):
    image: str


class ProtocolError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message
        super().__init__(message)


def _decode_image(data: str) -> Image.Image:
    try:
        raw = base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError):
        raise ProtocolError(422, "image is not valid base64")
    try:
        image = Image.open(io.BytesIO(raw))
        image.load()
    except (UnidentifiedImageError, OSError):
        raise ProtocolError(422, "image payload is not a decodable image")
    return image.convert("RGB")


def build_app(backend) -> FastAPI:
    app = FastAPI(title="travseg model sidecar")
    app.state.backend = backend
    # Model access is serialized; requests are independent and stateless.
    inference_lock = threading.Lock()

    @app.exception_handler(ProtocolError)
    async def protocol_error_handler(request: Request, exc: ProtocolError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"error": str(exc.errors()[:1])})

    @app.exception_handler(Exception)
    async def fallback_handler(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"error": f"{type(exc).__name__}: {exc}"}
        )

    def _ready():
        if app.state.backend is None:
            raise ProtocolError(503, "model not ready")
        return app.state.backend

    @app.get("/v1/health")
    def health() -> dict:
        if app.state.backend is None:
            raise ProtocolError(503, "model not ready")
        return {"status": "ok", "backend": app.state.backend.name}

    @app.post("/v1/masks")
    def masks(request: MasksRequest) -> dict:
        active = _ready()
        if not request.prompts:
            raise ProtocolError(422, "prompts must be a non-empty list")
        if any(not p.strip() for p in request.prompts):
            raise ProtocolError(422, "prompts must be non-empty strings")
        image = _decode_image(request.image)
        with inference_lock:
            fields = active.masks(image, list(request.prompts))
        width, height = image.size
        encoded = [
            base64.b64encode(np.asarray(field, dtype="<f4").tobytes()).decode("ascii")
            for field in fields
        ]
        return {"width": width, "height": height, "masks": encoded}

    @app.post("/v1/embed")
    def embed(request: EmbedRequest) -> dict:
        active = _ready()
        image = _decode_image(request.image)
        with inference_lock:
            vector = np.asarray(active.embedding(image), dtype=np.float64)
        return {"dim": int(vector.size), "values": [float(v) for v in vector]}

    return app

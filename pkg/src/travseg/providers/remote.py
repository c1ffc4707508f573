"""HTTP client for the inference-service wire protocol.

Requests carry the frame as a base64 PNG; mask responses carry one base64
float32 row-major array per prompt plus the resolution they were computed at.
Maps arriving at a different resolution are bilinearly resampled to frame
size before validation.
"""

from __future__ import annotations

import base64
import io
from typing import Sequence

import httpx
import numpy as np
from PIL import Image

from ..errors import MalformedResponseError, ProviderUnavailableError
from ..types import AttentionMap, Embedding, Frame
from .base import check_embedding_array, check_mask_array, check_mask_count

MASKS_PATH = "/v1/masks"
EMBED_PATH = "/v1/embed"
HEALTH_PATH = "/v1/health"


def encode_frame_png(frame: Frame) -> str:
    buf = io.BytesIO()
    Image.fromarray(frame.pixels, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_f32_b64(data: str, count: int | None = None) -> np.ndarray:
    try:
        values = np.frombuffer(base64.b64decode(data), dtype="<f4")
    except Exception as exc:
        raise MalformedResponseError(f"undecodable float32 payload: {exc}")
    if count is not None and values.size != count:
        raise MalformedResponseError(f"payload holds {values.size} floats, expected {count}")
    return values.astype(np.float64)


def resample_bilinear(values: np.ndarray, width: int, height: int) -> np.ndarray:
    """Resize a float map with bilinear interpolation (values stay in range)."""
    if values.shape == (height, width):
        return values
    img = Image.fromarray(values.astype(np.float32), mode="F")
    return np.asarray(img.resize((width, height), Image.BILINEAR), dtype=np.float64)


class RemoteProvider:
    """Mask and embedding provider backed by an HTTP inference service."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(base_url=self.base_url, timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise ProviderUnavailableError(f"{self.base_url}{path}: {exc}")
        if response.status_code >= 500:
            raise ProviderUnavailableError(
                f"{self.base_url}{path} returned {response.status_code}: {_error_text(response)}"
            )
        if response.status_code >= 400:
            raise MalformedResponseError(
                f"{self.base_url}{path} rejected request ({response.status_code}): "
                f"{_error_text(response)}"
            )
        try:
            return response.json()
        except ValueError:
            raise MalformedResponseError(f"{path} returned non-JSON body")

    def get_masks(self, frame: Frame, prompts: Sequence[str]) -> list[AttentionMap]:
        if len(prompts) == 0:
            raise MalformedResponseError("at least one prompt required")
        body = self._post(
            MASKS_PATH, {"image": encode_frame_png(frame), "prompts": list(prompts)}
        )
        try:
            width = int(body["width"])
            height = int(body["height"])
            encoded = body["masks"]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"mask response missing fields: {exc}")
        check_mask_count(encoded, prompts)
        maps = []
        for prompt, data in zip(prompts, encoded):
            flat = decode_f32_b64(data, width * height)
            resized = resample_bilinear(flat.reshape(height, width), frame.width, frame.height)
            maps.append(check_mask_array(resized, frame, prompt))
        return maps

    def get_embedding(self, frame: Frame) -> Embedding:
        body = self._post(EMBED_PATH, {"image": encode_frame_png(frame)})
        try:
            dim = int(body["dim"])
            values = np.asarray(body["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponseError(f"embed response missing fields: {exc}")
        if values.ndim != 1 or values.size != dim:
            raise MalformedResponseError(
                f"embed response dim field {dim} does not match {values.size} values"
            )
        return check_embedding_array(values)

    def healthy(self) -> bool:
        try:
            return self._client.get(HEALTH_PATH).status_code == 200
        except httpx.HTTPError:
            return False


def _error_text(response: httpx.Response) -> str:
    try:
        return str(response.json().get("error", response.text[:200]))
    except ValueError:
        return response.text[:200]

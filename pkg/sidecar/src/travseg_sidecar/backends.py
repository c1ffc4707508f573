"""Model backends: real CLIPSeg/CLIP inference, plus an offline stand-in.

Both backends satisfy the same small interface: `masks(image, prompts)`
returns a (k, H, W) float array in [0, 1] at the image's resolution, and
`embedding(image)` returns a 1-D float vector. Outputs must be deterministic
for identical inputs.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image


class BackendError(RuntimeError):
    """Backend could not be constructed (missing deps, unloadable weights)."""


class HashBackend:
    """Deterministic procedural backend for environments without model weights.

    Masks are smooth value-noise fields keyed by (seed, image bytes, prompt);
    embeddings are unit vectors keyed by (seed, image bytes). Useful for
    protocol conformance, integration tests, and development offline.
    """

    name = "hash"

    def __init__(self, seed: int = 0, dim: int = 64, grid: int = 4):
        self.seed = seed
        self.dim = dim
        self.grid = grid

    def _rng(self, *parts: object) -> np.random.Generator:
        digest = hashlib.blake2b(
            "\x1f".join(str(p) for p in parts).encode("utf-8"), digest_size=8
        ).digest()
        return np.random.default_rng(int.from_bytes(digest, "little"))

    def _image_key(self, image: Image.Image) -> str:
        return hashlib.blake2b(image.tobytes(), digest_size=16).hexdigest()

    def masks(self, image: Image.Image, prompts: list[str]) -> np.ndarray:
        width, height = image.size
        key = self._image_key(image)
        fields = []
        for prompt in prompts:
            rng = self._rng("mask", self.seed, key, prompt)
            ctrl = rng.random((self.grid + 1, self.grid + 1))
            ys = np.linspace(0.0, self.grid, height)
            xs = np.linspace(0.0, self.grid, width)
            y0 = np.minimum(ys.astype(int), self.grid - 1)
            x0 = np.minimum(xs.astype(int), self.grid - 1)
            ty = (ys - y0)[:, None]
            tx = (xs - x0)[None, :]
            c00 = ctrl[np.ix_(y0, x0)]
            c01 = ctrl[np.ix_(y0, x0 + 1)]
            c10 = ctrl[np.ix_(y0 + 1, x0)]
            c11 = ctrl[np.ix_(y0 + 1, x0 + 1)]
            top = c00 * (1 - tx) + c01 * tx
            bottom = c10 * (1 - tx) + c11 * tx
            fields.append(top * (1 - ty) + bottom * ty)
        return np.stack(fields, axis=0)

    def embedding(self, image: Image.Image) -> np.ndarray:
        rng = self._rng("embed", self.seed, self._image_key(image))
        vec = rng.standard_normal(self.dim)
        return vec / np.linalg.norm(vec)


class TransformersBackend:
    """CLIPSeg attention maps and CLIP image embeddings via transformers.

    Mask logits pass through a sigmoid to land in [0, 1], then are bilinearly
    resampled back to the request image's resolution. Inference runs in eval
    mode with a fixed seed, so identical requests yield identical responses.
    """

    name = "transformers"

    def __init__(
        self,
        mask_model: str = "CIDAS/clipseg-rd64-refined",
        embed_model: str = "openai/clip-vit-base-patch32",
        device: str = "cpu",
        max_edge: int = 512,
    ):
        try:
            import torch
            from transformers import AutoProcessor, CLIPModel, CLIPSegForImageSegmentation
        except ImportError as exc:
            raise BackendError(f"transformers backend needs torch+transformers: {exc}")
        try:
            self._torch = torch
            torch.manual_seed(0)
            self.mask_processor = AutoProcessor.from_pretrained(mask_model)
            self.mask_model = CLIPSegForImageSegmentation.from_pretrained(mask_model)
            self.embed_processor = AutoProcessor.from_pretrained(embed_model)
            self.embed_model = CLIPModel.from_pretrained(embed_model)
        except Exception as exc:
            raise BackendError(f"cannot load models ({mask_model}, {embed_model}): {exc}")
        self.device = device
        self.max_edge = max_edge
        self.mask_model.to(device).eval()
        self.embed_model.to(device).eval()

    def _inference_image(self, image: Image.Image) -> Image.Image:
        longest = max(image.size)
        if longest <= self.max_edge:
            return image
        scale = self.max_edge / longest
        return image.resize(
            (max(1, round(image.width * scale)), max(1, round(image.height * scale))),
            Image.BILINEAR,
        )

    def masks(self, image: Image.Image, prompts: list[str]) -> np.ndarray:
        torch = self._torch
        small = self._inference_image(image)
        inputs = self.mask_processor(
            text=list(prompts), images=[small] * len(prompts), return_tensors="pt", padding=True
        ).to(self.device)
        with torch.no_grad():
            logits = self.mask_model(**inputs).logits
        if logits.ndim == 2:  # single prompt folds the batch dimension
            logits = logits[None]
        probs = torch.sigmoid(logits).cpu().numpy().astype(np.float64)
        out = []
        for field in probs:
            img = Image.fromarray(field.astype(np.float32), mode="F")
            resized = np.asarray(
                img.resize(image.size, Image.BILINEAR), dtype=np.float64
            )
            out.append(np.clip(resized, 0.0, 1.0))
        return np.stack(out, axis=0)

    def embedding(self, image: Image.Image) -> np.ndarray:
        torch = self._torch
        inputs = self.embed_processor(
            images=self._inference_image(image), return_tensors="pt"
        ).to(self.device)
        with torch.no_grad():
            features = self.embed_model.get_image_features(**inputs)
        return features[0].cpu().numpy().astype(np.float64)


def build_backend(kind: str, **kwargs):
    if kind == "hash":
        allowed = {k: v for k, v in kwargs.items() if k in ("seed", "dim") and v is not None}
        return HashBackend(**allowed)
    if kind == "transformers":
        allowed = {
            k: v
            for k, v in kwargs.items()
            if k in ("mask_model", "embed_model", "device", "max_edge") and v is not None
        }
        return TransformersBackend(**allowed)
    raise BackendError(f"unknown backend {kind!r} (expected hash or transformers)")

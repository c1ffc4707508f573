"""Inference microservice for prompt-conditioned masks and image embeddings."""

from .app import build_app
from .backends import BackendError, HashBackend, TransformersBackend, build_backend

__version__ = "0.1.0"

__all__ = [
    "build_app",
    "BackendError",
    "HashBackend",
    "TransformersBackend",
    "build_backend",
    "__version__",
]

"""Reference HTTP embedding service for caption-to-vector workflows."""

from __future__ import annotations

from .app import DEFAULT_MAX_BATCH, create_app
from .encoder import (
    HashedEncoder,
    ModelNotAvailable,
    SentenceTransformerEncoder,
    load_encoder,
)

__all__ = [
    "DEFAULT_MAX_BATCH",
    "HashedEncoder",
    "ModelNotAvailable",
    "SentenceTransformerEncoder",
    "create_app",
    "load_encoder",
]

__version__ = "0.1.0"

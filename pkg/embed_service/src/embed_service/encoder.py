"""Text encoders served by the embedding endpoint.

Two backends are supported. The ``hashed:<dim>`` scheme is a
dependency-free deterministic encoder meant for tests, offline runs, and
wire-contract work: every token position maps to a fixed pseudo-random
vector and the text embedding is the mean over its token vectors. Any
other model id is treated as a sentence-transformers model name or path
and loaded lazily, so the package itself does not depend on a deep
learning stack.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HashedEncoder",
    "ModelNotAvailable",
    "SentenceTransformerEncoder",
    "load_encoder",
]

_HASHED_PREFIX = "hashed:"
_DEFAULT_TOKEN_LIMIT = 77


class ModelNotAvailable(ValueError):
    """The requested model id cannot be loaded in this environment."""


@dataclass
class HashedEncoder:
    """Deterministic offline encoder keyed on token content and position.

    Each ``(position, token)`` pair is hashed with SHA-256 and the digest
    seeds a PRNG that emits one standard-normal token vector. A text is
    whitespace-tokenized, truncated at ``token_limit`` tokens, and encoded
    as the raw (unnormalized) mean of its token vectors, so identical
    inputs always produce identical rows and word order matters.

    Attributes:
        dim: Dimension of every emitted embedding row.
        token_limit: Maximum number of tokens considered per text.
    """

    dim: int
    token_limit: int = _DEFAULT_TOKEN_LIMIT
    _memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.token_limit < 1:
            raise ValueError(f"token_limit must be positive, got {self.token_limit}")

    @property
    def model_id(self) -> str:
        return f"{_HASHED_PREFIX}{self.dim}"

    def _token_vector(self, position: int, token: str) -> np.ndarray:
        key = (position, token)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        digest = hashlib.sha256(f"{position}:{token}".encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "little")
        vec = np.random.default_rng(seed).standard_normal(self.dim)
        self._memo[key] = vec
        return vec

    def encode(self, texts: list[str]) -> np.ndarray:
        """Embeds a batch of texts.

        Args:
            texts: Texts to encode, in request order.

        Returns:
            Array of shape ``(len(texts), dim)``, dtype float32, one raw
            pooled embedding per input row.
        """
        rows = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            tokens = text.split()[: self.token_limit] or [""]
            pooled = np.zeros(self.dim, dtype=np.float64)
            for position, token in enumerate(tokens):
                pooled += self._token_vector(position, token)
            rows[i] = (pooled / len(tokens)).astype(np.float32)
        return rows


class SentenceTransformerEncoder:
    """Wraps a sentence-transformers model behind the encoder interface.

    The model runs in evaluation mode with fixed weights, so repeated
    calls on identical input are deterministic on a fixed device.
    """

    def __init__(self, model_id: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelNotAvailable(
                f"model {model_id!r} needs the sentence-transformers package: {exc}"
            ) from exc
        try:
            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise ModelNotAvailable(f"could not load model {model_id!r}: {exc}") from exc
        self._model_id = model_id
        probe = self._model.encode([""], convert_to_numpy=True)
        self.dim = int(probe.shape[1])
        limit = getattr(self._model, "max_seq_length", None)
        self.token_limit = int(limit) if limit else _DEFAULT_TOKEN_LIMIT

    @property
    def model_id(self) -> str:
        return self._model_id

    def encode(self, texts: list[str]) -> np.ndarray:
        rows = self._model.encode(
            texts, convert_to_numpy=True, normalize_embeddings=False
        )
        return np.asarray(rows, dtype=np.float32).reshape(len(texts), self.dim)


def load_encoder(model_id: str):
    """Builds the encoder named by ``model_id``.

    Args:
        model_id: Either ``hashed:<dim>`` for the deterministic offline
            encoder, or a sentence-transformers model name or local path.

    Returns:
        An encoder exposing ``dim``, ``token_limit``, ``model_id``, and
        ``encode(texts)``.

    Raises:
        ModelNotAvailable: the id is malformed or the backing model
            cannot be loaded.
    """
    if model_id.startswith(_HASHED_PREFIX):
        suffix = model_id[len(_HASHED_PREFIX) :]
        try:
            dim = int(suffix)
        except ValueError:
            raise ModelNotAvailable(
                f"hashed model ids take an integer dimension, got {model_id!r}"
            ) from None
        if dim < 1:
            raise ModelNotAvailable(f"dimension must be positive, got {model_id!r}")
        return HashedEncoder(dim=dim)
    return SentenceTransformerEncoder(model_id)

"""Caption embedding providers.

File mode serves vectors from a local embedding table keyed by the SHA-256
of each caption; HTTP mode fetches missing captions from a remote service
and keeps a write-through cache in the same table format. Results are always
returned in request order, whatever the internal batching does.
"""

from __future__ import annotations

import hashlib
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from . import dataio
from .errors import (
    DimensionMismatch,
    MissingEmbedding,
    SchemaError,
    ServiceUnavailable,
)
from .model import EmbeddingTable

_RETRIES = 3  # extra attempts after the first, with exponential backoff


def caption_key(text: str) -> str:
    """Cache/table key for one caption: SHA-256 hex of its UTF-8 bytes."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ProviderConfig:
    """Provider settings; mode-specific fields must be present for the mode."""

    mode: str
    table_path: str | Path | None = None
    endpoint_url: str | None = None
    batch_size: int = 32
    timeout: float = 10.0
    max_in_flight: int = 1
    cache_path: str | Path | None = None
    retry_backoff: float = 0.5

    def __post_init__(self):
        if self.mode not in ("file", "http"):
            raise SchemaError(f"mode must be 'file' or 'http', got {self.mode!r}")
        if self.mode == "file" and not self.table_path:
            raise SchemaError("file mode requires table_path")
        if self.mode == "http" and not self.endpoint_url:
            raise SchemaError("http mode requires endpoint_url")
        if self.batch_size < 1:
            raise SchemaError(f"batch_size must be positive, got {self.batch_size}")
        if self.max_in_flight < 1:
            raise SchemaError(f"max_in_flight must be positive, got {self.max_in_flight}")
        if self.timeout <= 0:
            raise SchemaError(f"timeout must be positive, got {self.timeout}")
        if self.retry_backoff < 0:
            raise SchemaError(f"retry_backoff must be non-negative, got {self.retry_backoff}")


class EmbeddingProvider:
    """Resolves caption texts to raw (unnormalized) embedding vectors."""

    def __init__(self, config: ProviderConfig):
        self.config = config
        self.requests_made = 0  # HTTP attempts, for cache accounting
        self._dim: int | None = None
        self._table: dict[str, np.ndarray] = {}
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self._session = requests.Session()
        if config.mode == "file":
            table = dataio.load_embeddings(config.table_path)
            self._table = dict(table.rows)
            self._dim = table.dim
        if config.cache_path and Path(config.cache_path).exists():
            cached = dataio.load_embeddings(config.cache_path)
            if self._dim is not None and cached.dim != self._dim:
                raise DimensionMismatch(
                    f"cache dim {cached.dim} disagrees with table dim {self._dim}"
                )
            self._cache = dict(cached.rows)
            self._dim = cached.dim if self._dim is None else self._dim

    @property
    def dim(self) -> int | None:
        return self._dim

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        """One vector per text, in request order, all of equal dimension.

        Vectors are returned raw (no normalization) and read-only.

        Raises:
            MissingEmbedding: file mode and a caption is not in the table.
            ServiceUnavailable: remote rejects the request or stays down
                through all retries.
            DimensionMismatch: a response disagrees with the known dimension.
        """
        for text in texts:
            if not isinstance(text, str) or not text:
                raise SchemaError("texts must be non-empty strings")
        keys = [caption_key(t) for t in texts]
        missing: list[tuple[str, str]] = []
        seen: set[str] = set()
        for key, text in zip(keys, texts):
            if key in self._cache or key in self._table or key in seen:
                continue
            seen.add(key)
            missing.append((key, text))
        if missing:
            if self.config.mode == "file":
                raise MissingEmbedding(
                    f"{len(missing)} caption(s) not in table, first: {missing[0][1]!r}"
                )
            self._fetch(missing)
        return [self._cache.get(k, self._table.get(k)) for k in keys]

    def cache_flush(self) -> None:
        """Persist every fetched vector to cache_path as an embedding table."""
        if not self.config.cache_path:
            raise SchemaError("cache_path not configured")
        with self._lock:
            self._write_cache_locked()

    # -- internals ------------------------------------------------------------

    def _fetch(self, missing: list[tuple[str, str]]) -> None:
        batches: list[list[tuple[str, str]]] = [
            missing[i : i + self.config.batch_size]
            for i in range(0, len(missing), self.config.batch_size)
        ]
        if self.config.max_in_flight > 1 and len(batches) > 1:
            with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
                futures = [pool.submit(self._post_batch, [t for _, t in b]) for b in batches]
                results = [f.result() for f in futures]
        else:
            results = [self._post_batch([t for _, t in b]) for b in batches]
        with self._lock:
            for batch, rows in zip(batches, results):
                for (key, text), row in zip(batch, rows):
                    vec = np.asarray(row, dtype=np.float32)
                    if vec.ndim != 1:
                        raise ServiceUnavailable(f"malformed embedding row for {text!r}")
                    if self._dim is None:
                        self._dim = int(vec.shape[0])
                    elif vec.shape[0] != self._dim:
                        raise DimensionMismatch(
                            f"service returned dim {vec.shape[0]}, expected {self._dim}"
                        )
                    if not np.isfinite(vec).all():
                        raise ServiceUnavailable(f"non-finite embedding for {text!r}")
                    vec.flags.writeable = False
                    self._cache[key] = vec
            if self.config.cache_path:
                self._write_cache_locked()

    def _post_batch(self, texts: list[str]) -> list:
        url = self.config.endpoint_url.rstrip("/") + "/embed"
        last_error = "no attempts made"
        for attempt in range(1 + _RETRIES):
            if attempt:
                time.sleep(self.config.retry_backoff * (2.0 ** (attempt - 1)))
            with self._lock:
                self.requests_made += 1
            try:
                response = self._session.post(
                    url, json={"texts": texts}, timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_error = f"connection failed: {exc}"
                continue
            if response.status_code == 200:
                rows = self._parse_response(response, len(texts))
                if rows is not None:
                    return rows
                last_error = "malformed response body"
                continue
            if 400 <= response.status_code < 500:
                raise ServiceUnavailable(
                    f"embed endpoint rejected the request: HTTP {response.status_code}"
                )
            last_error = f"HTTP {response.status_code}"
        raise ServiceUnavailable(
            f"embed endpoint failed after {1 + _RETRIES} attempts: {last_error}"
        )

    @staticmethod
    def _parse_response(response, expected: int):
        try:
            payload = response.json()
        except ValueError:
            return None
        if not isinstance(payload, dict):
            return None
        rows = payload.get("embeddings")
        dim = payload.get("dim")
        if not isinstance(rows, list) or len(rows) != expected or not isinstance(dim, int):
            return None
        if any(not isinstance(r, list) or len(r) != dim for r in rows):
            return None
        return rows

    def _write_cache_locked(self) -> None:
        if not self._cache:
            return
        table = EmbeddingTable(self._cache, dim=self._dim)
        dataio.save_embeddings(table, self.config.cache_path)

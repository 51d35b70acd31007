"""Shared test fixtures: synthetic corpora, deterministic caption vectors,
and a scripted HTTP embedding stub."""

from __future__ import annotations

import hashlib
import http.server
import json
import threading
import time
from pathlib import Path

import numpy as np
import pytest

from replaykit import AssetRecord, EmbeddingTable, caption_key, valid_captions
from replaykit import dataio


def caption_vector(caption: str, dim: int = 8) -> np.ndarray:
    """Deterministic pseudo-embedding for a caption, seeded by its hash."""
    seed = int.from_bytes(hashlib.sha256(caption.encode("utf-8")).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    return rng.normal(size=dim).astype(np.float32)


def make_records(
    classes: dict[str, int], captions_per: int = 2, split: str = "unassigned"
) -> list[AssetRecord]:
    records = []
    for label in sorted(classes):
        for i in range(classes[label]):
            captions = tuple(
                f"{label} asset {i} caption {j}" for j in range(captions_per)
            )
            records.append(AssetRecord(f"{label}-{i:04d}", label, captions, split))
    return records


def table_for(records, dim: int = 8, max_captions: int = 11) -> EmbeddingTable:
    rows = {}
    for record in records:
        for caption in valid_captions(record.captions, max_captions):
            rows[caption_key(caption)] = caption_vector(caption, dim)
    return EmbeddingTable(rows, dim=dim)


def write_corpus(
    dirpath: Path, classes: dict[str, int], dim: int = 8, captions_per: int = 2
) -> tuple[Path, Path]:
    """Write metadata + caption-embedding table files; returns their paths."""
    records = make_records(classes, captions_per)
    metadata = dirpath / "metadata.jsonl"
    dataio.save_metadata(records, metadata)
    table_path = dirpath / "captions.etf"
    dataio.save_embeddings(table_for(records, dim), table_path)
    return metadata, table_path


def long_tailed_classes(n_classes: int = 45, head: int = 185, floor: int = 15) -> dict[str, int]:
    """Deterministic long-tailed class sizes: floor + head/(rank+1)."""
    return {f"class{i:02d}": floor + head // (i + 1) for i in range(n_classes)}


class MappingProvider:
    """Minimal in-memory provider: caption text -> raw vector."""

    def __init__(self, mapping: dict[str, np.ndarray]):
        self.mapping = {k: np.asarray(v, dtype=np.float64) for k, v in mapping.items()}
        self.calls: list[list[str]] = []

    def embed_texts(self, texts):
        self.calls.append(list(texts))
        return [self.mapping[t] for t in texts]


class StubEmbedServer:
    """Scripted /embed endpoint returning hash-derived, text-determined rows.

    Knobs: fail_first N requests with 503, force a fixed status, inject a
    delay for texts containing delay_marker (to scramble completion order),
    or switch the advertised dimension mid-run.
    """

    def __init__(
        self,
        dim: int = 8,
        fail_first: int = 0,
        forced_status: int | None = None,
        delay_marker: str | None = None,
        delay: float = 0.05,
    ):
        self.dim = dim
        self.fail_first = fail_first
        self.forced_status = forced_status
        self.delay_marker = delay_marker
        self.delay = delay
        self.requests: list[list[str]] = []
        self._lock = threading.Lock()
        stub = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 (http.server API)
                if self.path != "/embed":
                    self.send_error(404)
                    return
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                texts = body["texts"]
                with stub._lock:
                    stub.requests.append(list(texts))
                    index = len(stub.requests)
                if stub.forced_status is not None:
                    self._reply(stub.forced_status, {"error": "scripted"})
                    return
                if index <= stub.fail_first:
                    self._reply(503, {"error": "scripted outage"})
                    return
                if stub.delay_marker and any(stub.delay_marker in t for t in texts):
                    time.sleep(stub.delay)
                rows = [stub.vector(t) for t in texts]
                self._reply(200, {"dim": stub.dim, "embeddings": rows})

            def _reply(self, status, payload):
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self._server.server_address[1]}"
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    def vector(self, text: str) -> list[float]:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        return [digest[i % len(digest)] / 255.0 for i in range(self.dim)]

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


@pytest.fixture
def stub_server():
    with StubEmbedServer() as server:
        yield server

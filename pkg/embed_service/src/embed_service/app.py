"""HTTP application exposing the embedding wire contract.

Routes:
    POST /embed: ``{"texts": [string]}`` in, ``{"dim", "embeddings"}`` out.
    GET /health: ``{"status", "dim", "model_id"}`` once the model is up.

The request body is parsed by hand rather than through a validation
model so every malformed payload maps to a plain 400, batches over the
configured limit map to 413, and requests arriving before an encoder is
attached map to 503.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse

__all__ = ["DEFAULT_MAX_BATCH", "create_app"]

DEFAULT_MAX_BATCH = 256


def _error(status_code: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status_code, content={"error": message})


def create_app(encoder=None, max_batch: int = DEFAULT_MAX_BATCH) -> FastAPI:
    """Builds the service application.

    Args:
        encoder: Object exposing ``dim``, ``token_limit``, ``model_id``,
            and ``encode(texts)``. ``None`` leaves the service in a
            loading state where both routes answer 503.
        max_batch: Largest accepted ``len(texts)`` per request.

    Returns:
        A FastAPI application ready for uvicorn.
    """
    if max_batch < 1:
        raise ValueError(f"max_batch must be positive, got {max_batch}")
    app = FastAPI(title="embed-service", docs_url=None, redoc_url=None)
    app.state.encoder = encoder
    app.state.max_batch = max_batch

    @app.get("/health")
    def health():
        enc = app.state.encoder
        if enc is None:
            return _error(503, "model not loaded")
        return {"status": "ok", "dim": enc.dim, "model_id": enc.model_id}

    @app.post("/embed")
    async def embed(request: Request):
        enc = app.state.encoder
        if enc is None:
            return _error(503, "model not loaded")
        try:
            payload = await request.json()
        except Exception:
            return _error(400, "body must be valid JSON")
        if not isinstance(payload, dict):
            return _error(400, "body must be a JSON object")
        texts = payload.get("texts")
        if not isinstance(texts, list):
            return _error(400, "texts must be an array of strings")
        if not texts:
            return _error(400, "texts must not be empty")
        if len(texts) > app.state.max_batch:
            return _error(
                413, f"batch of {len(texts)} exceeds limit {app.state.max_batch}"
            )
        if any(not isinstance(t, str) for t in texts):
            return _error(400, "texts must be an array of strings")
        rows = await run_in_threadpool(enc.encode, texts)
        return {"dim": enc.dim, "embeddings": rows.tolist()}

    return app

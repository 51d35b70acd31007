"""Tests for the embedding service application and its encoders."""

from __future__ import annotations

import sys

import numpy as np
import pytest
from fastapi.testclient import TestClient

from embed_service import (
    HashedEncoder,
    ModelNotAvailable,
    create_app,
    load_encoder,
)
from embed_service.cli import build_parser, main


def make_client(encoder=None, max_batch: int = 256) -> TestClient:
    if encoder is None:
        encoder = HashedEncoder(dim=8)
    return TestClient(create_app(encoder=encoder, max_batch=max_batch))


def test_health_reports_model():
    client = make_client()
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "dim": 8, "model_id": "hashed:8"}


def test_health_before_model_loaded_is_503():
    client = TestClient(create_app(encoder=None))
    response = client.get("/health")
    assert response.status_code == 503
    assert "not loaded" in response.json()["error"]


def test_embed_before_model_loaded_is_503():
    client = TestClient(create_app(encoder=None))
    response = client.post("/embed", json={"texts": ["hello"]})
    assert response.status_code == 503


def test_embed_shape_contract():
    client = make_client()
    texts = ["a red chair", "a small wooden table", "a glazed ceramic vase"]
    response = client.post("/embed", json={"texts": texts})
    assert response.status_code == 200
    payload = response.json()
    assert payload["dim"] == 8
    assert len(payload["embeddings"]) == len(texts)
    for row in payload["embeddings"]:
        assert len(row) == 8
        assert all(isinstance(value, float) for value in row)


def test_same_text_twice_gives_identical_rows():
    client = make_client()
    response = client.post(
        "/embed", json={"texts": ["twin caption", "other", "twin caption"]}
    )
    rows = response.json()["embeddings"]
    assert rows[0] == rows[2]
    assert rows[0] != rows[1]


def test_deterministic_across_calls_and_app_instances():
    texts = ["alpha", "beta gamma", "delta"]
    first = make_client().post("/embed", json={"texts": texts})
    second = make_client().post("/embed", json={"texts": texts})
    assert first.json() == second.json()


def test_rows_match_direct_encoder_output_in_order():
    encoder = HashedEncoder(dim=6)
    client = make_client(encoder=encoder)
    texts = ["one", "two", "three", "two"]
    rows = client.post("/embed", json={"texts": texts}).json()["embeddings"]
    expected = encoder.encode(texts)
    assert np.array_equal(np.asarray(rows, dtype=np.float32), expected)
    reversed_rows = client.post(
        "/embed", json={"texts": texts[::-1]}
    ).json()["embeddings"]
    assert reversed_rows == rows[::-1]


def test_empty_texts_array_rejected():
    response = make_client().post("/embed", json={"texts": []})
    assert response.status_code == 400


def test_missing_or_non_array_texts_rejected():
    client = make_client()
    assert client.post("/embed", json={}).status_code == 400
    assert client.post("/embed", json={"texts": "hello"}).status_code == 400
    assert client.post("/embed", json={"captions": ["x"]}).status_code == 400


def test_non_string_entry_rejected():
    response = make_client().post("/embed", json={"texts": ["fine", 3]})
    assert response.status_code == 400


def test_invalid_json_body_rejected():
    response = make_client().post(
        "/embed", content=b"not json", headers={"content-type": "application/json"}
    )
    assert response.status_code == 400


def test_non_object_json_body_rejected():
    response = make_client().post("/embed", json=["just", "a", "list"])
    assert response.status_code == 400


def test_batch_over_limit_rejected_with_413():
    client = make_client(max_batch=4)
    ok = client.post("/embed", json={"texts": ["t"] * 4})
    assert ok.status_code == 200
    too_big = client.post("/embed", json={"texts": ["t"] * 5})
    assert too_big.status_code == 413


def test_tokens_beyond_limit_are_truncated():
    encoder = HashedEncoder(dim=4, token_limit=5)
    words = [f"w{i}" for i in range(9)]
    full = encoder.encode([" ".join(words)])
    head = encoder.encode([" ".join(words[:5])])
    assert np.array_equal(full, head)
    tail_changed = words[:7] + ["changed", words[8]]
    assert np.array_equal(encoder.encode([" ".join(tail_changed)]), full)
    head_changed = ["changed"] + words[1:]
    assert not np.array_equal(encoder.encode([" ".join(head_changed)]), full)


def test_whitespace_only_text_encodes_deterministically():
    encoder = HashedEncoder(dim=4)
    rows = encoder.encode(["   ", "", "\t\n"])
    assert np.array_equal(rows[0], rows[1])
    assert np.array_equal(rows[0], rows[2])
    assert np.isfinite(rows).all()


def test_word_order_changes_the_embedding():
    encoder = HashedEncoder(dim=8)
    rows = encoder.encode(["red chair", "chair red"])
    assert not np.array_equal(rows[0], rows[1])


def test_load_encoder_parses_hashed_ids():
    encoder = load_encoder("hashed:16")
    assert isinstance(encoder, HashedEncoder)
    assert encoder.dim == 16
    assert encoder.model_id == "hashed:16"


@pytest.mark.parametrize("model_id", ["hashed:", "hashed:zero", "hashed:0", "hashed:-3"])
def test_load_encoder_rejects_bad_hashed_ids(model_id):
    with pytest.raises(ModelNotAvailable):
        load_encoder(model_id)


def test_load_encoder_reports_missing_backend(monkeypatch):
    monkeypatch.setitem(sys.modules, "sentence_transformers", None)
    with pytest.raises(ModelNotAvailable, match="sentence-transformers"):
        load_encoder("some/model")


def test_encoder_validates_construction():
    with pytest.raises(ValueError):
        HashedEncoder(dim=0)
    with pytest.raises(ValueError):
        HashedEncoder(dim=4, token_limit=0)


def test_create_app_validates_max_batch():
    with pytest.raises(ValueError):
        create_app(encoder=HashedEncoder(dim=4), max_batch=0)


def test_cli_parser_defaults():
    args = build_parser().parse_args([])
    assert args.host == "127.0.0.1"
    assert args.port == 8080
    assert args.model_id == "hashed:768"
    assert args.max_batch == 256


def test_cli_rejects_unloadable_model(capsys):
    code = main(["--model-id", "hashed:zero"])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_cli_rejects_bad_max_batch(capsys):
    code = main(["--max-batch", "0"])
    assert code == 1
    assert "max-batch" in capsys.readouterr().err

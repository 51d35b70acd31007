"""File formats: JSONL asset metadata, binary embedding tables, JSON manifests.

All JSON emission is canonical (sorted keys, fixed layout) so equal
in-memory values always produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateId,
    EmptyCaptions,
    HeaderMismatch,
    IoError,
    MissingField,
    ParseError,
    SchemaError,
    TruncatedBody,
)
from .model import (
    SPLIT_VALUES,
    AllocationPlan,
    AssetRecord,
    ClassQuota,
    EmbeddingTable,
    ReplayManifest,
    ReplayParams,
)

_METADATA_FIELDS = ("asset_id", "class_label", "captions")


# -- asset metadata (JSONL) ---------------------------------------------------

def load_metadata(path: str | Path) -> list[AssetRecord]:
    """Parse a newline-delimited metadata file into records, in file order.

    Each line is a JSON object with asset_id, class_label, captions, and an
    optional split tag. Blank lines are skipped.

    Raises:
        ParseError: malformed JSON or wrong field types (message carries the
            1-based line number).
        MissingField: a required key is absent.
        EmptyCaptions: the captions array has no non-blank entry.
        IoError: the file cannot be read.
    """
    records: list[AssetRecord] = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ParseError(f"{path}: line {lineno}: expected a JSON object")
        for key in _METADATA_FIELDS:
            if key not in obj:
                raise MissingField(f"{path}: line {lineno}: missing {key!r}")
        asset_id, class_label, captions = (obj[k] for k in _METADATA_FIELDS)
        if not isinstance(asset_id, str) or not isinstance(class_label, str):
            raise ParseError(f"{path}: line {lineno}: asset_id and class_label must be strings")
        if not isinstance(captions, list) or not all(isinstance(c, str) for c in captions):
            raise ParseError(f"{path}: line {lineno}: captions must be an array of strings")
        if not any(c.strip() for c in captions):
            raise EmptyCaptions(f"{path}: line {lineno}: no valid captions for {asset_id!r}")
        split = obj.get("split", "unassigned")
        if split not in SPLIT_VALUES:
            raise ParseError(f"{path}: line {lineno}: split must be one of {SPLIT_VALUES}")
        records.append(AssetRecord(asset_id, class_label, tuple(captions), split))
    return records


def save_metadata(records: Iterable[AssetRecord], path: str | Path) -> None:
    """Write records as one canonical JSON object per line, UTF-8."""
    lines = []
    for r in records:
        obj = {
            "asset_id": r.asset_id,
            "captions": list(r.captions),
            "class_label": r.class_label,
            "split": r.split,
        }
        lines.append(json.dumps(obj, sort_keys=True, ensure_ascii=False))
    _write_text(path, "".join(line + "\n" for line in lines))


# -- embedding tables (binary) ------------------------------------------------

def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read a binary embedding table.

    Layout: one JSON header line {"count", "dim", "dtype": "f32le", "ids"},
    then count*dim little-endian float32 values, row-major, row i keyed by
    ids[i].

    Raises:
        HeaderMismatch: header malformed or internally inconsistent.
        TruncatedBody: body length does not equal count*dim*4.
        DuplicateId: repeated id in the header.
        IoError: the file cannot be read.
    """
    try:
        with open(path, "rb") as fh:
            header_line = fh.readline()
            body = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderMismatch(f"{path}: invalid header: {exc}") from exc
    if not isinstance(header, dict):
        raise HeaderMismatch(f"{path}: header is not a JSON object")
    for key in ("count", "dim", "dtype", "ids"):
        if key not in header:
            raise HeaderMismatch(f"{path}: header missing {key!r}")
    count, dim, dtype, ids = header["count"], header["dim"], header["dtype"], header["ids"]
    if dtype != "f32le":
        raise HeaderMismatch(f"{path}: unsupported dtype {dtype!r}")
    if not isinstance(count, int) or count < 0:
        raise HeaderMismatch(f"{path}: count must be a non-negative integer")
    if not isinstance(dim, int) or dim < 1:
        raise HeaderMismatch(f"{path}: dim must be a positive integer")
    if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
        raise HeaderMismatch(f"{path}: ids must be an array of strings")
    if len(ids) != count:
        raise HeaderMismatch(f"{path}: header count {count} != {len(ids)} ids")
    if len(set(ids)) != count:
        raise DuplicateId(f"{path}: duplicate ids in header")

    expected = count * dim * 4
    if len(body) != expected:
        raise TruncatedBody(f"{path}: body is {len(body)} bytes, expected {expected}")
    matrix = np.frombuffer(body, dtype="<f4").reshape(count, dim)
    return EmbeddingTable({ids[i]: matrix[i] for i in range(count)}, dim=dim)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write a table in the binary format; rows are emitted in sorted id order."""
    ids = table.ids()
    header = {"count": len(ids), "dim": table.dim, "dtype": "f32le", "ids": ids}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"
    body = b"".join(table.rows[i].astype("<f4", copy=False).tobytes() for i in ids)
    _write_bytes(path, header_bytes + body)


# -- replay manifests (JSON) --------------------------------------------------

def save_manifest(manifest: ReplayManifest, path: str | Path) -> None:
    """Write a manifest as canonical JSON (sorted keys, 2-space indent)."""
    _write_text(path, manifest_to_json(manifest))


def manifest_to_json(manifest: ReplayManifest) -> str:
    payload = {
        "allocation": plan_to_dict(manifest.allocation),
        "input_digests": dict(manifest.input_digests),
        "notes": list(manifest.notes),
        "params": _params_to_dict(manifest.params),
        "selections": {label: list(ids) for label, ids in manifest.selections.items()},
        "tool_version": manifest.tool_version,
    }
    return canonical_json(payload)


def load_manifest(path: str | Path) -> ReplayManifest:
    """Read a manifest written by save_manifest.

    Raises:
        SchemaError: missing keys or values that violate manifest invariants.
        IoError: the file cannot be read.
    """
    try:
        payload = json.loads(read_text(path))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: manifest is not a JSON object")
    try:
        params = ReplayParams(**payload["params"])
        plan = _plan_from_dict(payload["allocation"])
        selections = {label: tuple(ids) for label, ids in payload["selections"].items()}
        return ReplayManifest(
            params=params,
            allocation=plan,
            selections=selections,
            tool_version=payload["tool_version"],
            input_digests=dict(payload.get("input_digests", {})),
            notes=tuple(payload.get("notes", ())),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed manifest: {exc!r}") from exc


def _params_to_dict(params: ReplayParams) -> dict[str, Any]:
    return {
        "replay_pct": params.replay_pct,
        "m_min": params.m_min,
        "m_max": params.m_max,
        "p_max": params.p_max,
        "max_captions": params.max_captions,
        "strategy": params.strategy,
        "seed": params.seed,
    }


def plan_to_dict(plan: AllocationPlan) -> dict[str, Any]:
    return {
        "budget": plan.budget,
        "alpha": plan.alpha,
        "shortfall": plan.shortfall,
        "quotas": [
            {"class_label": q.class_label, "n_c": q.n_c, "u_c": q.u_c, "k_c": q.k_c}
            for q in plan.quotas
        ],
    }


def _plan_from_dict(obj: dict[str, Any]) -> AllocationPlan:
    quotas = tuple(
        ClassQuota(q["class_label"], q["n_c"], q["u_c"], q["k_c"]) for q in obj["quotas"]
    )
    return AllocationPlan(obj["budget"], obj["alpha"], quotas, obj["shortfall"])


# -- shared helpers -----------------------------------------------------------

def canonical_json(obj: Any) -> str:
    """Canonical JSON text: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_json(obj: Any, path: str | Path) -> None:
    _write_text(path, canonical_json(obj))


def load_class_list(path: str | Path) -> list[str]:
    """Read class labels from plain text, one label per line; blanks skipped."""
    return [line.strip() for line in read_text(path).splitlines() if line.strip()]


def file_digest(path: str | Path) -> str:
    """SHA-256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                digest.update(chunk)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return digest.hexdigest()


def read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _read_lines(path: str | Path) -> list[str]:
    return read_text(path).splitlines()


def _write_text(path: str | Path, text: str) -> None:
    _write_bytes(path, text.encode("utf-8"))


def _write_bytes(path: str | Path, data: bytes) -> None:
    # Write via a sibling temp file and rename, so readers never see partial output.
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc

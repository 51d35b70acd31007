"""End-to-end replay set construction.

Computes the budget from the replay ratio, allocates per-class quotas,
selects exemplars per class with the configured strategy, and assembles a
reproducible manifest. Per-class work can run on several threads; the
manifest is identical at any parallelism level.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor

from ._version import __version__
from .allocation import allocate_budget
from .errors import DuplicateAssetId, SchemaError, UnresolvedAssetId
from .model import AssetRecord, ClassInventory, ReplayManifest, ReplayParams
from .selection import embed_asset, select_kcenter, select_random


def compute_budget(replay_pct: float, novel_size: int, available: int) -> int:
    """floor((replay_pct / 100) * novel_size), clamped to what is available."""
    if novel_size < 1:
        raise SchemaError(f"novel_size must be positive, got {novel_size}")
    if available < 0:
        raise SchemaError(f"available must be non-negative, got {available}")
    budget = math.floor((replay_pct / 100.0) * novel_size)
    return min(budget, available)


def create_replay_set(
    base_inventory: ClassInventory,
    novel_size: int,
    params: ReplayParams,
    provider=None,
    *,
    threads: int = 1,
    input_digests: Mapping[str, str] | None = None,
) -> ReplayManifest:
    """Build a replay manifest over the base-train inventory.

    Args:
        base_inventory: base-stage training assets only (no test records).
        novel_size: novel-stage training set size; sets the budget together
            with params.replay_pct.
        params: replay configuration; kcenter strategy requires a provider.
        provider: caption embedding provider (kcenter only).
        threads: per-class selection parallelism; results do not depend on it.
        input_digests: optional provenance digests recorded in the manifest.

    Returns:
        ReplayManifest with selections per class, sized exactly to the plan.
    """
    if params.strategy == "kcenter" and provider is None:
        raise SchemaError("kcenter strategy requires an embedding provider")
    budget = compute_budget(params.replay_pct, novel_size, base_inventory.total())
    plan = allocate_budget(base_inventory, budget, params.m_min, params.m_max, params.p_max)
    quotas = {q.class_label: q.k_c for q in plan.quotas}
    labels = sorted(quotas)

    def pick(label: str) -> tuple[list[str], str | None]:
        records = base_inventory.classes[label]
        k = quotas[label]
        if k == 0:
            return [], None
        if k >= len(records):
            return sorted(r.asset_id for r in records), None
        if params.strategy == "random":
            return select_random(records, k, params.seed), None
        embeddings = [embed_asset(r, provider, params.max_captions) for r in records]
        result = select_kcenter(embeddings, k)
        note = None
        if result.degenerate_mean:
            note = (
                f"class {label!r}: degenerate embedding mean; "
                "seed fell back to the smallest asset_id"
            )
        return list(result.ids), note

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(pick, labels))
    else:
        outcomes = [pick(label) for label in labels]

    selections = {label: tuple(ids) for label, (ids, _) in zip(labels, outcomes)}
    notes = tuple(note for _, note in outcomes if note is not None)
    return ReplayManifest(
        params=params,
        allocation=plan,
        selections=selections,
        tool_version=__version__,
        input_digests=dict(input_digests or {}),
        notes=notes,
    )


def mix_training_view(
    manifest: ReplayManifest,
    base_records: Sequence[AssetRecord],
    novel_records: Sequence[AssetRecord],
) -> list[AssetRecord]:
    """Union of the replay exemplars and the novel training records.

    Replay ids are resolved against base_records; the combined view is
    deduplicated and sorted by asset_id so emission is stable.

    Raises:
        UnresolvedAssetId: a manifest id is absent from base_records.
        DuplicateAssetId: one id appears in both the base and novel corpora.
    """
    by_id = {r.asset_id: r for r in base_records}
    combined: dict[str, AssetRecord] = {}
    for asset_id in manifest.selected_ids():
        record = by_id.get(asset_id)
        if record is None:
            raise UnresolvedAssetId(f"manifest id {asset_id!r} not found in base metadata")
        combined[asset_id] = record
    for record in novel_records:
        if record.asset_id in combined:
            raise DuplicateAssetId(
                f"asset {record.asset_id!r} appears in both base and novel metadata"
            )
        combined[record.asset_id] = record
    return [combined[asset_id] for asset_id in sorted(combined)]

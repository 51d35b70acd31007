"""Exemplar selection within one class.

Assets are embedded as the renormalized mean of their per-caption unit
vectors; the k-center strategy seeds at the asset closest to the class mean
and then greedily takes farthest points under cosine distance. A seeded
random strategy is the baseline. All ties break on the lexicographically
smallest asset_id, so results are independent of input order.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMean, NoValidCaptions, SchemaError
from .model import AssetRecord, valid_captions
from .prng import keyed_generator

_MEAN_NORM_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class AssetEmbedding:
    """Unit-norm embedding v for one asset, plus how many captions fed it."""

    asset_id: str
    v: np.ndarray
    caption_count_used: int


def embed_asset(record: AssetRecord, provider, max_captions: int) -> AssetEmbedding:
    """Embed an asset from its first `max_captions` valid captions.

    Each caption embedding is unit-normalized, the normalized vectors are
    averaged, and the mean is normalized again.

    Raises:
        NoValidCaptions: every caption is blank.
        DegenerateMean: the caption vectors cancel (mean norm below 1e-9) or
            a caption embeds to the zero vector.
    """
    captions = valid_captions(record.captions, max_captions)
    if not captions:
        raise NoValidCaptions(f"asset {record.asset_id!r} has no valid captions")
    raw = provider.embed_texts(captions)
    z = np.asarray(raw, dtype=np.float64)
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms < 1e-12):
        raise DegenerateMean(f"asset {record.asset_id!r}: zero-norm caption embedding")
    mean = (z / norms[:, None]).mean(axis=0)
    mean_norm = float(np.linalg.norm(mean))
    if mean_norm < _MEAN_NORM_FLOOR:
        raise DegenerateMean(f"asset {record.asset_id!r}: caption embeddings cancel out")
    return AssetEmbedding(record.asset_id, mean / mean_norm, len(captions))


@dataclass(frozen=True)
class KCenterResult:
    """Selected ids in pick order; degenerate_mean marks the seed fallback."""

    ids: tuple[str, ...]
    degenerate_mean: bool = False


def select_kcenter(assets: Sequence[AssetEmbedding], k: int) -> KCenterResult:
    """Greedy k-center over unit embeddings with cosine distance 1 - <a, b>.

    The seed is the asset most similar to the normalized class mean; each
    further pick maximizes the distance to its nearest already-selected
    center. If the embedding sum is degenerate (norm ~ 0), the seed falls
    back to the smallest asset_id and the result is flagged. With k >= N all
    ids are returned in ascending order.

    Args:
        assets: embeddings for one class; asset_ids must be distinct.
        k: number of exemplars to pick, >= 1.

    Returns:
        KCenterResult with min(k, N) distinct ids.
    """
    if k < 1:
        raise SchemaError(f"k must be >= 1, got {k}")
    if not assets:
        raise SchemaError("no assets to select from")
    ordered = sorted(assets, key=lambda a: a.asset_id)
    ids = [a.asset_id for a in ordered]
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate asset_ids in selection input")
    if k >= len(ordered):
        return KCenterResult(tuple(ids))

    # Sorting by id up front makes every argmax tie resolve to the smallest
    # id (numpy returns the first maximum) and keeps float summation order
    # canonical, so output is invariant under input permutation.
    v = np.asarray([a.v for a in ordered], dtype=np.float64)
    total = v.sum(axis=0)
    total_norm = float(np.linalg.norm(total))
    degenerate = total_norm < _MEAN_NORM_FLOOR
    if degenerate:
        seed = 0
    else:
        seed = int(np.argmax(v @ (total / total_norm)))

    selected = [seed]
    d_min = 1.0 - v @ v[seed]
    d_min[seed] = -1.0  # sentinel below any cosine distance; marks taken rows
    for _ in range(k - 1):
        pick = int(np.argmax(d_min))
        selected.append(pick)
        np.minimum(d_min, 1.0 - v @ v[pick], out=d_min)
        d_min[pick] = -1.0
    return KCenterResult(tuple(ids[i] for i in selected), degenerate)


def select_random(records: Sequence[AssetRecord], k: int, seed: int) -> list[str]:
    """Draw k distinct asset_ids without replacement, in draw order.

    The generator is keyed by (seed, class_label), so per-class draws do not
    depend on how many other classes were processed first. Records are
    expected to share one class label; mixed input is keyed by the empty
    label. With k >= N all ids are returned in ascending order.
    """
    if k < 1:
        raise SchemaError(f"k must be >= 1, got {k}")
    if not records:
        raise SchemaError("no records to select from")
    ids = sorted(r.asset_id for r in records)
    if k >= len(ids):
        return ids
    labels = {r.class_label for r in records}
    label = next(iter(labels)) if len(labels) == 1 else ""
    gen = keyed_generator(seed, label)
    picks = gen.choice(len(ids), size=k, replace=False)
    return [ids[int(i)] for i in picks]

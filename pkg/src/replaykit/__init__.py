"""Budgeted replay-buffer construction and evaluation for class-incremental
generative training over captioned 3D asset corpora.

The pipeline: build base/novel benchmark splits over a long-tailed inventory
(benchmark), allocate a replay budget across classes proportionally to
sqrt(class size) under caps (allocation), pick per-class exemplars by greedy
k-center in caption-embedding space or at random (selection), and evaluate
outcomes with CLIP-score aggregation, Fréchet distance, and forgetting
percentages (metrics).
"""

from __future__ import annotations

from ._version import __version__
from .allocation import allocate_budget, effective_cap, total_for_alpha
from .benchmark import SplitSpec, build_splits, filter_classes, split_stats
from .model import (
    AllocationPlan,
    AssetRecord,
    ClassInventory,
    ClassQuota,
    EmbeddingTable,
    MetricReport,
    ReplayManifest,
    ReplayParams,
    valid_captions,
    validate_inventory,
)
from .metrics import (
    FeatureSet,
    GaussianMoments,
    assemble_clip_report,
    assemble_fd_report,
    clip_score,
    forgetting,
    frechet_distance,
    moments,
    per_asset_clip_scores,
    render_report_table,
)
from .prng import keyed_generator
from .providers import EmbeddingProvider, ProviderConfig, caption_key
from .replay import compute_budget, create_replay_set, mix_training_view
from .selection import (
    AssetEmbedding,
    KCenterResult,
    embed_asset,
    select_kcenter,
    select_random,
)

__all__ = [
    "__version__",
    "AllocationPlan",
    "AssetEmbedding",
    "AssetRecord",
    "ClassInventory",
    "ClassQuota",
    "EmbeddingProvider",
    "EmbeddingTable",
    "FeatureSet",
    "GaussianMoments",
    "KCenterResult",
    "MetricReport",
    "ProviderConfig",
    "ReplayManifest",
    "ReplayParams",
    "SplitSpec",
    "allocate_budget",
    "assemble_clip_report",
    "assemble_fd_report",
    "build_splits",
    "caption_key",
    "clip_score",
    "compute_budget",
    "create_replay_set",
    "effective_cap",
    "embed_asset",
    "filter_classes",
    "forgetting",
    "frechet_distance",
    "keyed_generator",
    "mix_training_view",
    "moments",
    "per_asset_clip_scores",
    "render_report_table",
    "select_kcenter",
    "select_random",
    "split_stats",
    "total_for_alpha",
    "valid_captions",
    "validate_inventory",
]

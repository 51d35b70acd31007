"""Core domain types shared across the library.

AssetRecord / ClassInventory describe the captioned corpus, EmbeddingTable
holds id-keyed vectors, and ReplayParams / AllocationPlan / ReplayManifest /
MetricReport carry the replay pipeline's configuration and outputs.
All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateAssetId,
    EmptyCaptions,
    EmptyClassLabel,
    SchemaError,
)

SPLIT_VALUES = ("train", "test", "unassigned")
STRATEGIES = ("kcenter", "random")
DIRECTIONS = ("higher_better", "lower_better")

MAX_SEED = 2**64 - 1


@dataclass(frozen=True, slots=True)
class AssetRecord:
    """One captioned 3D asset; the mesh itself is referenced by id only."""

    asset_id: str
    class_label: str
    captions: tuple[str, ...]
    split: str = "unassigned"


def valid_captions(captions: Iterable[str], limit: int | None = None) -> list[str]:
    """Return the first `limit` captions that are non-empty after whitespace trim.

    Invalid (blank) captions are skipped, not errors; source order is
    preserved and the original strings are returned untrimmed.
    """
    out = [c for c in captions if c.strip()]
    if limit is not None:
        out = out[:limit]
    return out


@dataclass(frozen=True)
class ClassInventory:
    """Assets grouped by class label; labels are compared byte-exact."""

    classes: dict[str, tuple[AssetRecord, ...]]

    def counts(self) -> dict[str, int]:
        return {label: len(records) for label, records in self.classes.items()}

    def labels(self) -> list[str]:
        return sorted(self.classes)

    def total(self) -> int:
        return sum(len(records) for records in self.classes.values())

    def records(self) -> list[AssetRecord]:
        out: list[AssetRecord] = []
        for label in self.labels():
            out.extend(self.classes[label])
        return out


def validate_inventory(records: Sequence[AssetRecord]) -> ClassInventory:
    """Group records by class and enforce record invariants.

    Args:
        records: parsed asset records, in source order.

    Returns:
        ClassInventory with classes keyed in sorted label order and each
        class's records kept in input order.

    Raises:
        DuplicateAssetId: two records share an asset_id.
        EmptyCaptions: a record has no caption left after whitespace trim.
        EmptyClassLabel: a record's class label is empty or blank.
    """
    seen: set[str] = set()
    grouped: dict[str, list[AssetRecord]] = {}
    for record in records:
        if record.asset_id in seen:
            raise DuplicateAssetId(f"duplicate asset_id {record.asset_id!r}")
        seen.add(record.asset_id)
        if not record.class_label.strip():
            raise EmptyClassLabel(f"asset {record.asset_id!r} has an empty class label")
        if not valid_captions(record.captions):
            raise EmptyCaptions(f"asset {record.asset_id!r} has no valid captions")
        grouped.setdefault(record.class_label, []).append(record)
    return ClassInventory({label: tuple(grouped[label]) for label in sorted(grouped)})


class EmbeddingTable:
    """Id-keyed matrix of fixed-dimension float32 vectors.

    Vectors are stored read-only; all rows share one dimension and every
    component is finite.
    """

    __slots__ = ("dim", "rows")

    def __init__(self, rows: Mapping[str, np.ndarray], dim: int | None = None):
        checked: dict[str, np.ndarray] = {}
        for key, value in rows.items():
            vec = np.asarray(value, dtype=np.float32)
            if vec.ndim != 1:
                raise SchemaError(f"embedding for {key!r} is not a 1-D vector")
            if dim is None:
                dim = int(vec.shape[0])
            elif vec.shape[0] != dim:
                raise DimensionMismatch(
                    f"embedding for {key!r} has dim {vec.shape[0]}, expected {dim}"
                )
            if not np.isfinite(vec).all():
                raise SchemaError(f"embedding for {key!r} has non-finite components")
            vec = vec.copy()
            vec.flags.writeable = False
            checked[key] = vec
        if dim is None:
            raise SchemaError("embedding table dimension unknown (no rows, no dim)")
        if dim < 1:
            raise SchemaError(f"embedding dimension must be positive, got {dim}")
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "rows", checked)

    def __setattr__(self, name, value):  # immutable after construction
        raise AttributeError("EmbeddingTable is immutable")

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, key: str) -> bool:
        return key in self.rows

    def get(self, key: str) -> np.ndarray | None:
        return self.rows.get(key)

    def ids(self) -> list[str]:
        return sorted(self.rows)

    def matrix(self, ids: Sequence[str] | None = None) -> np.ndarray:
        keys = self.ids() if ids is None else list(ids)
        return np.stack([self.rows[k] for k in keys]) if keys else np.empty((0, self.dim), np.float32)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise SchemaError(message)


@dataclass(frozen=True, slots=True)
class ReplayParams:
    """Replay construction parameters.

    replay_pct is the budget as a percentage of the novel-set size; m_min,
    m_max, and p_max bound the per-class quota; max_captions caps how many
    captions feed each asset embedding.
    """

    replay_pct: float
    m_min: int = 3
    m_max: int = 20
    p_max: float = 0.30
    max_captions: int = 11
    strategy: str = "kcenter"
    seed: int = 0

    def __post_init__(self):
        _require(0 < self.replay_pct <= 100, f"replay_pct must be in (0, 100], got {self.replay_pct}")
        _require(self.m_min >= 1, f"m_min must be positive, got {self.m_min}")
        _require(self.m_max >= self.m_min, f"m_max must be >= m_min, got {self.m_max} < {self.m_min}")
        _require(0 < self.p_max <= 1, f"p_max must be in (0, 1], got {self.p_max}")
        _require(self.max_captions >= 1, f"max_captions must be positive, got {self.max_captions}")
        _require(self.strategy in STRATEGIES, f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        _require(0 <= self.seed <= MAX_SEED, f"seed must fit in 64 bits, got {self.seed}")


@dataclass(frozen=True, slots=True)
class ClassQuota:
    """Per-class allocation entry: availability n_c, cap u_c, quota k_c."""

    class_label: str
    n_c: int
    u_c: int
    k_c: int

    def __post_init__(self):
        _require(self.n_c >= 1, f"n_c must be positive, got {self.n_c}")
        _require(self.u_c >= 0, f"u_c must be non-negative, got {self.u_c}")
        if self.u_c >= 1:
            _require(1 <= self.k_c <= self.u_c,
                     f"quota for {self.class_label!r} out of bounds: k={self.k_c}, u={self.u_c}")
        else:
            _require(self.k_c == 0, f"quota for capped-out class {self.class_label!r} must be 0")


@dataclass(frozen=True, slots=True)
class AllocationPlan:
    """Budget split across classes, with the alpha that produced it."""

    budget: int
    alpha: float
    quotas: tuple[ClassQuota, ...]
    shortfall: int

    def __post_init__(self):
        _require(self.budget >= 0, f"budget must be non-negative, got {self.budget}")
        _require(self.alpha >= 0, f"alpha must be non-negative, got {self.alpha}")
        labels = [q.class_label for q in self.quotas]
        _require(len(set(labels)) == len(labels), "duplicate class labels in allocation plan")
        total = self.total()
        _require(total <= self.budget, f"quotas sum to {total}, above budget {self.budget}")
        _require(self.shortfall == self.budget - total,
                 f"shortfall {self.shortfall} != budget {self.budget} - total {total}")

    def total(self) -> int:
        return sum(q.k_c for q in self.quotas)

    def quota_for(self, class_label: str) -> ClassQuota:
        for q in self.quotas:
            if q.class_label == class_label:
                return q
        raise KeyError(class_label)


@dataclass(frozen=True, slots=True)
class ReplayManifest:
    """Selected exemplar set plus everything needed to reproduce it."""

    params: ReplayParams
    allocation: AllocationPlan
    selections: dict[str, tuple[str, ...]]
    tool_version: str
    input_digests: dict[str, str] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        for q in self.allocation.quotas:
            ids = self.selections.get(q.class_label)
            _require(ids is not None, f"missing selections for class {q.class_label!r}")
            _require(len(ids) == q.k_c,
                     f"class {q.class_label!r} selected {len(ids)} ids, quota is {q.k_c}")
            _require(len(set(ids)) == len(ids), f"duplicate selections in class {q.class_label!r}")
        extra = set(self.selections) - {q.class_label for q in self.allocation.quotas}
        _require(not extra, f"selections for classes outside the plan: {sorted(extra)}")

    def selected_ids(self) -> list[str]:
        out: list[str] = []
        for label in sorted(self.selections):
            out.extend(self.selections[label])
        return out


@dataclass(frozen=True, slots=True)
class MetricReport:
    """One metric family's base / novel / all values plus forgetting."""

    metric: str
    direction: str
    base: float
    novel: float
    overall: float
    forgetting_pct: float | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        _require(self.direction in DIRECTIONS,
                 f"direction must be one of {DIRECTIONS}, got {self.direction!r}")

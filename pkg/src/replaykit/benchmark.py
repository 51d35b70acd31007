"""Class-incremental benchmark construction over long-tailed inventories.

Filters out undersized classes, validates a configured base/novel class
partition, samples per-class test sets with an order-independent seeded
generator, and reports split statistics.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from typing import Any

from .errors import OverlappingSplits, SchemaError, UnknownClass
from .model import MAX_SEED, AssetRecord, ClassInventory, validate_inventory
from .prng import keyed_generator


@dataclass(frozen=True)
class SplitSpec:
    """Configuration for one base/novel benchmark split."""

    base_classes: tuple[str, ...]
    novel_classes: tuple[str, ...]
    min_class_size: int = 15
    max_classes: int = 90
    test_per_class: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.base_classes or not self.novel_classes:
            raise SchemaError("base_classes and novel_classes must be non-empty")
        overlap = set(self.base_classes) & set(self.novel_classes)
        if overlap:
            raise OverlappingSplits(f"classes in both base and novel: {sorted(overlap)}")
        if len(set(self.base_classes)) != len(self.base_classes):
            raise SchemaError("duplicate labels in base_classes")
        if len(set(self.novel_classes)) != len(self.novel_classes):
            raise SchemaError("duplicate labels in novel_classes")
        if self.min_class_size < 1:
            raise SchemaError(f"min_class_size must be positive, got {self.min_class_size}")
        if self.max_classes < 1:
            raise SchemaError(f"max_classes must be positive, got {self.max_classes}")
        if self.test_per_class < 1:
            raise SchemaError(f"test_per_class must be positive, got {self.test_per_class}")
        if not 0 <= self.seed <= MAX_SEED:
            raise SchemaError(f"seed must fit in 64 bits, got {self.seed}")


def spec_from_dict(obj: Mapping[str, Any]) -> SplitSpec:
    """Build a SplitSpec from parsed JSON, applying defaults."""
    try:
        return SplitSpec(
            base_classes=tuple(obj["base_classes"]),
            novel_classes=tuple(obj["novel_classes"]),
            min_class_size=int(obj.get("min_class_size", 15)),
            max_classes=int(obj.get("max_classes", 90)),
            test_per_class=int(obj.get("test_per_class", 5)),
            seed=int(obj.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed split spec: {exc!r}") from exc


def filter_classes(
    records: Sequence[AssetRecord], min_class_size: int = 15, max_classes: int = 90
) -> ClassInventory:
    """Drop classes below min_class_size, then keep the max_classes largest.

    Size ties at the cutoff break on lexicographically smaller label.
    """
    if min_class_size < 1:
        raise SchemaError(f"min_class_size must be positive, got {min_class_size}")
    if max_classes < 1:
        raise SchemaError(f"max_classes must be positive, got {max_classes}")
    inventory = validate_inventory(records)
    survivors = [
        label for label, recs in inventory.classes.items() if len(recs) >= min_class_size
    ]
    if len(survivors) > max_classes:
        survivors.sort(key=lambda label: (-len(inventory.classes[label]), label))
        survivors = survivors[:max_classes]
    return ClassInventory({label: inventory.classes[label] for label in sorted(survivors)})


def build_splits(
    inventory: ClassInventory, spec: SplitSpec
) -> dict[str, list[AssetRecord]]:
    """Partition each configured class into train and test records.

    Per class, min(test_per_class, n_c - 1) test assets are drawn without
    replacement by the (seed, class_label)-keyed generator, so at least one
    training asset always remains and draws are independent of class
    processing order. Split tags are written onto the returned records.

    Returns:
        {"base_train", "base_test", "novel_train", "novel_test"} mapping to
        record lists sorted by (class_label, asset_id).

    Raises:
        UnknownClass: a configured class is missing from the inventory.
        OverlappingSplits: base and novel share a class.
    """
    overlap = set(spec.base_classes) & set(spec.novel_classes)
    if overlap:
        raise OverlappingSplits(f"classes in both base and novel: {sorted(overlap)}")
    for label in (*spec.base_classes, *spec.novel_classes):
        if label not in inventory.classes:
            raise UnknownClass(f"class {label!r} not present after filtering")

    def sample(labels: Sequence[str]) -> tuple[list[AssetRecord], list[AssetRecord]]:
        train: list[AssetRecord] = []
        test: list[AssetRecord] = []
        for label in sorted(labels):
            records = sorted(inventory.classes[label], key=lambda r: r.asset_id)
            n = len(records)
            draw = min(spec.test_per_class, n - 1)
            chosen: set[int] = set()
            if draw > 0:
                gen = keyed_generator(spec.seed, label)
                chosen = {int(i) for i in gen.choice(n, size=draw, replace=False)}
            for index, record in enumerate(records):
                if index in chosen:
                    test.append(replace(record, split="test"))
                else:
                    train.append(replace(record, split="train"))
        return train, test

    base_train, base_test = sample(spec.base_classes)
    novel_train, novel_test = sample(spec.novel_classes)
    return {
        "base_train": base_train,
        "base_test": base_test,
        "novel_train": novel_train,
        "novel_test": novel_test,
    }


def split_stats(named_splits: Mapping[str, Sequence[AssetRecord]]) -> dict[str, Any]:
    """Per-split class counts, totals, and sorted class-frequency histograms.

    For split names of the form "<group>_train" / "<group>_test", a totals
    rollup per group is included.
    """
    stats: dict[str, Any] = {"splits": {}, "totals": {}}
    for name in sorted(named_splits):
        records = named_splits[name]
        per_class: dict[str, int] = {}
        for record in records:
            per_class[record.class_label] = per_class.get(record.class_label, 0) + 1
        stats["splits"][name] = {
            "classes": len(per_class),
            "count": len(records),
            "per_class": dict(sorted(per_class.items())),
            "sorted_counts": sorted(per_class.values(), reverse=True),
        }
    for name, entry in stats["splits"].items():
        group, _, suffix = name.rpartition("_")
        key = group if suffix in ("train", "test") and group else name
        stats["totals"][key] = stats["totals"].get(key, 0) + entry["count"]
    return stats

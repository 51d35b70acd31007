"""Evaluation metrics: CLIP-score aggregation, Fréchet distance, forgetting.

Features arrive precomputed; nothing here renders meshes or runs encoders.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EigDecompositionFailure,
    MissingFeature,
    SchemaError,
    TooFewSamples,
)
from .model import EmbeddingTable, MetricReport

_EPS_REG = 1e-6


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Labeled n x d feature matrix."""

    label: str
    features: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.features, dtype=np.float64)
        if arr.ndim != 2:
            raise SchemaError(f"features for {self.label!r} must be a 2-D matrix")
        if not np.isfinite(arr).all():
            raise SchemaError(f"features for {self.label!r} contain non-finite values")
        object.__setattr__(self, "features", arr)


@dataclass(frozen=True, eq=False)
class GaussianMoments:
    """Sample mean and covariance of one feature distribution."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.shape[0], mean.shape[0]):
            raise SchemaError("moments must be a d-vector mean and d x d covariance")
        asymmetry = float(np.abs(cov - cov.T).max()) if cov.size else 0.0
        if not asymmetry <= 1e-8:
            raise SchemaError(f"covariance is not symmetric (max asymmetry {asymmetry})")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def moments(features: FeatureSet) -> GaussianMoments:
    """Sample mean and unbiased (n-1) covariance.

    Raises:
        TooFewSamples: fewer than 2 rows.
    """
    x = features.features
    n = x.shape[0]
    if n < 2:
        raise TooFewSamples(f"{features.label!r} has {n} rows, need at least 2")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianMoments(mean, cov)


def frechet_distance(a: GaussianMoments, b: GaussianMoments) -> float:
    """Gaussian Fréchet distance |dmu|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))."""
    value, _ = frechet_distance_detailed(a, b)
    return value


def frechet_distance_detailed(a: GaussianMoments, b: GaussianMoments) -> tuple[float, bool]:
    """Fréchet distance plus whether singular covariances were regularized.

    The cross term is computed as Tr(A^(1/2)) with A = S1^(1/2) S2 S1^(1/2),
    using symmetric eigendecompositions; negative eigenvalues are clamped to
    zero and the result is clamped to be non-negative. When either covariance
    fails a Cholesky test, 1e-6 is added to both diagonals (keeping the
    distance of a moment pair to itself at zero) and the flag is returned.

    Raises:
        DimensionMismatch: the two moment pairs have different dimensions.
        EigDecompositionFailure: the eigensolver did not converge.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"moment dims differ: {a.dim} vs {b.dim}")
    cov_a, cov_b = a.cov, b.cov
    regularized = _is_singular(cov_a) or _is_singular(cov_b)
    if regularized:
        bump = _EPS_REG * np.eye(a.dim)
        cov_a = cov_a + bump
        cov_b = cov_b + bump
    root_a = _psd_sqrt(cov_a)
    inner = root_a @ cov_b @ root_a
    inner = 0.5 * (inner + inner.T)
    eigenvalues = _eigvalsh(inner)
    trace_sqrt = float(np.sqrt(np.clip(eigenvalues, 0.0, None)).sum())
    delta = a.mean - b.mean
    value = float(delta @ delta + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_sqrt)
    return max(value, 0.0), regularized


def per_asset_clip_scores(
    text_features: EmbeddingTable,
    render_features: EmbeddingTable,
    grouping: Mapping[str, Sequence[str]],
) -> dict[str, float]:
    """Mean cosine similarity between each asset's text and its renders.

    Args:
        text_features: one text vector per asset, keyed by asset_id.
        render_features: render vectors keyed by render id.
        grouping: asset_id to its render ids (each asset needs at least one).

    Returns:
        asset_id -> mean cosine, at raw cosine scale.

    Raises:
        MissingFeature: empty grouping, an asset with no renders, or a
            missing vector.
        DimensionMismatch: text and render tables disagree on dimension.
        ZeroDivisionError: a zero-norm feature vector.
    """
    if not grouping:
        raise MissingFeature("empty grouping: no assets to score")
    if text_features.dim != render_features.dim:
        raise DimensionMismatch(
            f"text dim {text_features.dim} != render dim {render_features.dim}"
        )
    scores: dict[str, float] = {}
    for asset_id in sorted(grouping):
        render_ids = grouping[asset_id]
        if not render_ids:
            raise MissingFeature(f"asset {asset_id!r} has no render features")
        text = text_features.get(asset_id)
        if text is None:
            raise MissingFeature(f"no text feature for asset {asset_id!r}")
        text = np.asarray(text, dtype=np.float64)
        text_norm = float(np.linalg.norm(text))
        if text_norm == 0.0:
            raise ZeroDivisionError(f"zero-norm text feature for asset {asset_id!r}")
        cosines = []
        for render_id in render_ids:
            render = render_features.get(render_id)
            if render is None:
                raise MissingFeature(f"no render feature {render_id!r} (asset {asset_id!r})")
            render = np.asarray(render, dtype=np.float64)
            render_norm = float(np.linalg.norm(render))
            if render_norm == 0.0:
                raise ZeroDivisionError(f"zero-norm render feature {render_id!r}")
            cosines.append(float(text @ render) / (text_norm * render_norm))
        scores[asset_id] = sum(cosines) / len(cosines)
    return scores


def clip_score(
    text_features: EmbeddingTable,
    render_features: EmbeddingTable,
    grouping: Mapping[str, Sequence[str]],
) -> float:
    """100 x mean over assets of the per-asset mean text-render cosine."""
    scores = per_asset_clip_scores(text_features, render_features, grouping)
    return 100.0 * _mean_over_ids(scores)


def forgetting(before: float, after: float, direction: str) -> float:
    """Relative percentage change of a base metric after novel training.

    higher_better: 100 * (before - after) / before; lower_better flips the
    sign. Negative values indicate backward transfer (the base metric
    improved).

    Raises:
        ZeroDivisionError: before is zero.
    """
    if direction not in ("higher_better", "lower_better"):
        raise SchemaError(f"unknown direction {direction!r}")
    if before == 0:
        raise ZeroDivisionError("before metric is zero; forgetting is undefined")
    change = 100.0 * (before - after) / before
    return change if direction == "higher_better" else -change


def assemble_clip_report(
    base_scores: Mapping[str, float],
    novel_scores: Mapping[str, float],
    base_before: float | None = None,
) -> MetricReport:
    """CLIP report: per-split means and the pooled per-asset mean.

    Scores arrive at cosine scale (per_asset_clip_scores output) and are
    reported at the 100x scale; base_before is at the reported scale.
    """
    if not base_scores or not novel_scores:
        raise MissingFeature("base and novel score maps must be non-empty")
    if set(base_scores) & set(novel_scores):
        raise SchemaError("an asset appears in both base and novel scores")
    base = 100.0 * _mean_over_ids(base_scores)
    novel = 100.0 * _mean_over_ids(novel_scores)
    pooled = {**base_scores, **novel_scores}
    overall = 100.0 * _mean_over_ids(pooled)
    forgot = None if base_before is None else forgetting(base_before, base, "higher_better")
    return MetricReport("clip", "higher_better", base, novel, overall, forgot)


def assemble_fd_report(
    generated_base: FeatureSet,
    reference_base: FeatureSet,
    generated_novel: FeatureSet,
    reference_novel: FeatureSet,
    base_before: float | None = None,
) -> MetricReport:
    """FD report: per-split distances plus pooled generated vs pooled reference."""
    base, reg_base = frechet_distance_detailed(
        moments(generated_base), moments(reference_base)
    )
    novel, reg_novel = frechet_distance_detailed(
        moments(generated_novel), moments(reference_novel)
    )
    pooled_generated = FeatureSet(
        "generated-all", np.vstack([generated_base.features, generated_novel.features])
    )
    pooled_reference = FeatureSet(
        "reference-all", np.vstack([reference_base.features, reference_novel.features])
    )
    overall, reg_all = frechet_distance_detailed(
        moments(pooled_generated), moments(pooled_reference)
    )
    notes = tuple(
        f"{scope}: singular covariance, added {_EPS_REG} to both diagonals"
        for scope, flagged in (("base", reg_base), ("novel", reg_novel), ("all", reg_all))
        if flagged
    )
    forgot = None if base_before is None else forgetting(base_before, base, "lower_better")
    return MetricReport("fd", "lower_better", base, novel, overall, forgot, notes)


def render_report_table(report: MetricReport) -> str:
    """Aligned plain-text table with Base / Novel / All / F(%) columns."""
    header = f"{'Metric':<10}{'Base':>10}{'Novel':>10}{'All':>10}{'F(%)':>10}"
    forgot = "-" if report.forgetting_pct is None else f"{report.forgetting_pct:.2f}"
    row = (
        f"{report.metric:<10}{report.base:>10.2f}{report.novel:>10.2f}"
        f"{report.overall:>10.2f}{forgot:>10}"
    )
    lines = [header, row]
    lines.extend(f"note: {note}" for note in report.notes)
    return "\n".join(lines)


# -- internals ----------------------------------------------------------------

def _mean_over_ids(scores: Mapping[str, float]) -> float:
    # Summation in sorted-key order keeps the result bit-stable under
    # permutation of the mapping.
    return sum(scores[key] for key in sorted(scores)) / len(scores)


def _is_singular(cov: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(cov)
        return False
    except np.linalg.LinAlgError:
        return True


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise EigDecompositionFailure(f"eigendecomposition failed: {exc}") from exc
    clamped = np.clip(eigenvalues, 0.0, None)
    return (eigenvectors * np.sqrt(clamped)) @ eigenvectors.T


def _eigvalsh(mat: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(mat)
    except np.linalg.LinAlgError as exc:
        raise EigDecompositionFailure(f"eigendecomposition failed: {exc}") from exc

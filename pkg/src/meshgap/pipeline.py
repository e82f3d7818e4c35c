"""End-to-end classification for a mesh pair, with ensemble voting.

Each predictor runs the full single-model path (round-trip error, median
filter, threshold, label filter); the ensemble keeps vertices flagged by at
least `vote_min` models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cice import (
    LabelField,
    ScalarField,
    compute_cice,
    dilate_labels,
    majority_label_filter,
    median_filter,
    save_label_csv,
    save_scalar_csv,
    threshold_labels,
)
from .correspondence import PredictorSpec, predict
from .errors import ValidationError
from .mesh import AdjacencyIndex, TriangleMesh, build_adjacency


@dataclass(frozen=True)
class PipelineConfig:
    threshold_mm: float
    predictor_specs: tuple
    vote_min: int = 1
    cice_filter_rounds: int = 1
    label_filter_rounds: int = 1
    use_dilation: bool = False  # any-neighbour-true instead of boolean median

    def __post_init__(self):
        object.__setattr__(self, "predictor_specs", tuple(self.predictor_specs))
        if self.threshold_mm <= 0:
            raise ValidationError("threshold_mm must be positive")
        if not self.predictor_specs:
            raise ValidationError("at least one predictor spec is required")
        if not (1 <= self.vote_min <= len(self.predictor_specs)):
            raise ValidationError(
                f"vote_min must be in [1, {len(self.predictor_specs)}], got {self.vote_min}"
            )
        if self.cice_filter_rounds < 0 or self.label_filter_rounds < 0:
            raise ValidationError("filter rounds must be >= 0")


@dataclass(frozen=True)
class ModelOutputs:
    """Per-predictor intermediate fields, kept for failure inspection."""

    spec: PredictorSpec
    cice_raw: ScalarField
    cice_filtered: ScalarField
    labels: LabelField


@dataclass(frozen=True)
class PairClassification:
    final: LabelField
    models: tuple


def vote(label_fields, vote_min: int) -> LabelField:
    """missing iff at least vote_min of the fields mark the vertex missing."""
    fields = list(label_fields)
    if not fields:
        raise ValidationError("vote needs at least one label field")
    if not (1 <= vote_min <= len(fields)):
        raise ValidationError(f"vote_min must be in [1, {len(fields)}], got {vote_min}")
    n = len(fields[0])
    if any(len(f) != n for f in fields):
        raise ValidationError("label fields must all have the same length")
    counts = np.sum([f.labels for f in fields], axis=0)
    return LabelField(counts >= vote_min)


def prepare_model_fields(
    source: TriangleMesh,
    target: TriangleMesh,
    specs,
    adjacency: AdjacencyIndex,
    cice_filter_rounds: int = 1,
):
    """Filtered (and raw) round-trip error fields per predictor.

    Threshold-independent, so a sweep computes these once per pair.
    """
    out = []
    for spec in specs:
        forward = predict(spec, source, target)
        backward = predict(spec, target, source)
        raw = compute_cice(source, forward, backward)
        filt = (
            median_filter(raw, adjacency, cice_filter_rounds) if cice_filter_rounds else raw
        )
        out.append((spec, raw, filt))
    return out


def labels_from_fields(
    prepared,
    adjacency: AdjacencyIndex,
    threshold_mm: float,
    label_filter_rounds: int,
    vote_min: int,
    use_dilation: bool = False,
) -> PairClassification:
    models = []
    for spec, raw, filt in prepared:
        lab = threshold_labels(filt, threshold_mm)
        if label_filter_rounds:
            if use_dilation:
                lab = dilate_labels(lab, adjacency, label_filter_rounds)
            else:
                lab = majority_label_filter(lab, adjacency, label_filter_rounds)
        models.append(ModelOutputs(spec, raw, filt, lab))
    final = vote([m.labels for m in models], vote_min)
    return PairClassification(final, tuple(models))


def classify_pair(
    source: TriangleMesh, target: TriangleMesh, config: PipelineConfig
) -> PairClassification:
    """Full pipeline for one mesh pair under the given configuration."""
    adjacency = build_adjacency(source)
    prepared = prepare_model_fields(
        source, target, config.predictor_specs, adjacency, config.cice_filter_rounds
    )
    return labels_from_fields(
        prepared,
        adjacency,
        config.threshold_mm,
        config.label_filter_rounds,
        config.vote_min,
        config.use_dilation,
    )


def write_classification(result: PairClassification, out_dir) -> None:
    """final_labels.csv plus per-model cICE/label CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_label_csv(result.final, out / "final_labels.csv")
    for k, m in enumerate(result.models):
        save_scalar_csv(m.cice_filtered, out / f"model_{k}_cice.csv")
        save_scalar_csv(m.cice_raw, out / f"model_{k}_cice_raw.csv")
        save_label_csv(m.labels, out / f"model_{k}_labels.csv")

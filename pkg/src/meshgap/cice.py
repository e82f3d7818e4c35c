"""Per-vertex round-trip consistency error, mesh-graph filters, thresholding.

The error at source vertex i is the Euclidean distance between the vertex and
where it lands after mapping forward to the target and back to the source.
Vertices with no true counterpart on the target land far away, so large values
mark candidate missing regions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .correspondence import CorrespondenceMap, compose
from .errors import MeshFormatError, ValidationError
from .mesh import AdjacencyIndex, TriangleMesh


@dataclass(frozen=True)
class ScalarField:
    """One non-negative real (mm) per source vertex."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 1:
            raise ValidationError("scalar field must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValidationError("scalar field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class LabelField:
    """Per-vertex missing/present classification (True = missing)."""

    labels: np.ndarray

    def __post_init__(self):
        l = np.ascontiguousarray(np.asarray(self.labels, dtype=bool))
        if l.ndim != 1:
            raise ValidationError("label field must be one-dimensional")
        l.setflags(write=False)
        object.__setattr__(self, "labels", l)

    def __len__(self) -> int:
        return len(self.labels)

    def missing_count(self) -> int:
        return int(self.labels.sum())


def compute_cice(
    source: TriangleMesh, forward: CorrespondenceMap, backward: CorrespondenceMap
) -> ScalarField:
    """values(i) = |x(i) - x(backward(forward(i)))| in mm."""
    if forward.source_count != source.vertex_count:
        raise ValidationError(
            f"forward map covers {forward.source_count} vertices, source has {source.vertex_count}"
        )
    if backward.target_count != source.vertex_count:
        raise ValidationError(
            f"backward map lands on {backward.target_count} vertices, source has {source.vertex_count}"
        )
    roundtrip = compose(forward, backward).assignment
    delta = source.vertices - source.vertices[roundtrip]
    return ScalarField(np.linalg.norm(delta, axis=1))


def _check_sizes(n_field: int, adjacency: AdjacencyIndex):
    if n_field != adjacency.vertex_count:
        raise ValidationError(
            f"field length {n_field} does not match adjacency vertex count {adjacency.vertex_count}"
        )


def median_filter(field: ScalarField, adjacency: AdjacencyIndex, rounds: int = 1) -> ScalarField:
    """Replace each value by the lower median of {self} U {1-ring neighbours}.

    Lower median: for an even multiset, the lower of the two central elements,
    so every output value is an element of the input neighbourhood multiset.
    Isolated vertices keep their own value. Rounds apply sequentially.
    """
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")
    _check_sizes(len(field), adjacency)
    mat, deg = adjacency.padded()
    vals = field.values
    rows = np.arange(len(vals))
    # multiset size deg+1 (self included); padding slots sort to the end
    med_idx = deg // 2
    for _ in range(rounds):
        gathered = np.concatenate([vals[:, None], vals[mat]], axis=1)
        pad = np.arange(mat.shape[1])[None, :] >= deg[:, None]
        gathered[:, 1:][pad] = np.inf
        gathered.sort(axis=1)
        vals = gathered[rows, med_idx]
    return ScalarField(vals)


def threshold_labels(field: ScalarField, t: float) -> LabelField:
    """Mark vertices with value strictly above t (mm) as missing."""
    if t <= 0:
        raise ValidationError(f"threshold must be positive, got {t}")
    return LabelField(field.values > t)


def majority_label_filter(
    labels: LabelField, adjacency: AdjacencyIndex, rounds: int = 1
) -> LabelField:
    """Boolean median over the 1-ring-plus-self neighbourhood.

    True iff strictly more than half of the multiset is True; an exact tie
    (even multiset, half True) keeps the vertex's own input label.
    """
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")
    _check_sizes(len(labels), adjacency)
    mat, deg = adjacency.padded()
    lab = labels.labels
    pad = np.arange(mat.shape[1])[None, :] >= deg[:, None]
    size = deg + 1
    for _ in range(rounds):
        nb = lab[mat]
        nb[pad] = False
        count = nb.sum(axis=1) + lab
        lab = np.where(2 * count > size, True, np.where(2 * count == size, lab, False))
    return LabelField(lab)


def dilate_labels(labels: LabelField, adjacency: AdjacencyIndex, rounds: int = 1) -> LabelField:
    """True morphological dilation: missing if self or any neighbour is missing.

    Alternative reading of the post-threshold cleanup pass; not the default.
    """
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")
    _check_sizes(len(labels), adjacency)
    mat, deg = adjacency.padded()
    pad = np.arange(mat.shape[1])[None, :] >= deg[:, None]
    lab = labels.labels
    for _ in range(rounds):
        nb = lab[mat]
        nb[pad] = False
        lab = lab | nb.any(axis=1)
    return LabelField(lab)


# ---------------------------------------------------------------- CSV IO


def save_scalar_csv(field: ScalarField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "value"])
        for i, v in enumerate(field.values):
            w.writerow([i, repr(float(v))])


def load_scalar_csv(path) -> ScalarField:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["vertex", "value"]:
        raise MeshFormatError(f"{path}: expected header 'vertex,value'")
    return ScalarField(np.array([float(r[1]) for r in rows[1:]]))


def save_label_csv(labels: LabelField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "missing"])
        for i, l in enumerate(labels.labels):
            w.writerow([i, int(l)])


def load_label_csv(path) -> LabelField:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["vertex", "missing"]:
        raise MeshFormatError(f"{path}: expected header 'vertex,missing'")
    vals = [r[1] for r in rows[1:]]
    if any(v not in ("0", "1") for v in vals):
        raise MeshFormatError(f"{path}: labels must be 0 or 1")
    return LabelField(np.array([v == "1" for v in vals]))

"""Simulated resections: box cuts, removed-volume estimation, ground truth.

Cuts operate directly on the mesh: vertices strictly inside an oriented box
are dropped together with their incident faces, leaving a jagged open edge.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cice import LabelField
from .errors import BudgetExhaustedError, GeometryError, ValidationError
from .mesh import TriangleMesh, points_in_mesh
from .pipeline import vote

ABSENT = -1


@dataclass(frozen=True)
class CutBox:
    """Oriented box: local axes are the columns of `rotation` (orthonormal)."""

    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        h = np.asarray(self.half_extents, dtype=np.float64).reshape(3)
        r = np.eye(3) if self.rotation is None else np.asarray(self.rotation, dtype=np.float64)
        if np.any(h <= 0):
            raise ValidationError(f"half_extents must be positive, got {h}")
        if r.shape != (3, 3) or not np.allclose(r.T @ r, np.eye(3), atol=1e-9):
            raise ValidationError("rotation must be a 3x3 orthonormal matrix (tol 1e-9)")
        for arr in (c, h, r):
            arr.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", h)
        object.__setattr__(self, "rotation", r)

    def contains(self, points) -> np.ndarray:
        """Strict interior test in box-local coordinates."""
        local = (np.atleast_2d(points) - self.center) @ self.rotation
        return np.all(np.abs(local) < self.half_extents, axis=1)

    def to_json_dict(self) -> dict:
        return {
            "center": [float(x) for x in self.center],
            "half_extents": [float(x) for x in self.half_extents],
            "rotation": [float(x) for x in self.rotation.ravel()],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "CutBox":
        return CutBox(
            np.array(d["center"]),
            np.array(d["half_extents"]),
            np.array(d["rotation"]).reshape(3, 3),
        )


@dataclass(frozen=True)
class ResectionResult:
    cut_mesh: TriangleMesh
    removed_vertex_indices: np.ndarray  # sorted original-mesh indices
    index_map: np.ndarray  # original index -> new index, ABSENT for removed
    removed_volume_fraction: float
    removed_vertex_fraction: float


@dataclass(frozen=True)
class VolumeSampleCache:
    """Seeded bounding-box samples and their inside-mesh mask, reusable across
    many box-fraction estimates on the same mesh."""

    points: np.ndarray
    inside: np.ndarray

    @staticmethod
    def build(mesh: TriangleMesh, n_samples: int, seed: int) -> "VolumeSampleCache":
        rng = np.random.default_rng(seed)
        lo, hi = mesh.bounding_box()
        pts = rng.uniform(lo, hi, size=(n_samples, 3))
        return VolumeSampleCache(pts, points_in_mesh(mesh, pts))

    def box_fraction(self, box: CutBox) -> float:
        """Fraction of the mesh volume inside the box."""
        n_inside = int(self.inside.sum())
        if n_inside == 0:
            raise GeometryError("no Monte-Carlo samples fell inside the mesh")
        return float(box.contains(self.points[self.inside]).sum() / n_inside)


def cut_mesh(
    mesh: TriangleMesh,
    box: CutBox,
    volume_samples: int = 50_000,
    seed: int = 0,
    sample_cache: VolumeSampleCache | None = None,
) -> ResectionResult:
    """Remove all vertices strictly inside the box, with their faces.

    Surviving vertices keep their relative order. The removed volume fraction
    is a seeded Monte-Carlo estimate over the mesh bounding box (or reuses a
    prebuilt cache for batch workflows).
    """
    removed_mask = box.contains(mesh.vertices)
    removed = np.nonzero(removed_mask)[0].astype(np.int64)
    if len(removed) == mesh.vertex_count:
        raise ValidationError("cut would remove every vertex of the mesh")
    index_map = np.full(mesh.vertex_count, ABSENT, dtype=np.int64)
    survivors = np.nonzero(~removed_mask)[0]
    index_map[survivors] = np.arange(len(survivors))
    keep_face = ~removed_mask[mesh.faces].any(axis=1)
    new_faces = index_map[mesh.faces[keep_face]]
    new_mesh = TriangleMesh(mesh.vertices[survivors], new_faces, name=f"{mesh.name}_cut")
    if sample_cache is None:
        sample_cache = VolumeSampleCache.build(mesh, volume_samples, seed)
    return ResectionResult(
        cut_mesh=new_mesh,
        removed_vertex_indices=removed,
        index_map=index_map,
        removed_volume_fraction=sample_cache.box_fraction(box),
        removed_vertex_fraction=len(removed) / mesh.vertex_count,
    )


def plan_cuts(
    mesh: TriangleMesh,
    count: int,
    box_width: float,
    seed: int,
    target_fraction_range: tuple,
    volume_samples: int = 50_000,
    proposals_per_cut: int = 200,
    sample_cache: VolumeSampleCache | None = None,
) -> list:
    """Seeded search for `count` boxes whose removed-volume fraction falls in
    [lo, hi].

    Boxes are `box_width` wide along a surface-point axis (pointing outward
    through a random vertex) and span the whole mesh in the two perpendicular
    directions, i.e. a slab-shaped cut. The box center starts at a surface
    vertex and is pulled a random depth (up to one width) toward the centroid,
    so deeper cuts reach larger fractions.
    """
    lo, hi = target_fraction_range
    if count < 1:
        raise ValidationError("count must be >= 1")
    if not (0 < lo < hi < 1):
        raise ValidationError(f"fraction range must satisfy 0 < lo < hi < 1, got [{lo}, {hi}]")
    if box_width <= 0:
        raise ValidationError("box_width must be positive")
    rng = np.random.default_rng(seed)
    if sample_cache is None:
        sample_cache = VolumeSampleCache.build(mesh, volume_samples, seed)
    bb_lo, bb_hi = mesh.bounding_box()
    span = float(np.linalg.norm(bb_hi - bb_lo))  # slab reach in perpendicular axes
    centroid = mesh.vertices.mean(axis=0)
    boxes = []
    budget = count * proposals_per_cut
    for _ in range(budget):
        p = mesh.vertices[rng.integers(0, mesh.vertex_count)]
        axis = p - centroid
        norm = np.linalg.norm(axis)
        if norm < 1e-12:
            continue
        axis /= norm
        depth = rng.uniform(0.0, box_width)
        center = p - depth * axis
        # complete an orthonormal frame around the cut axis
        helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = np.cross(axis, helper)
        u /= np.linalg.norm(u)
        w = np.cross(axis, u)
        rotation = np.column_stack([axis, u, w])
        box = CutBox(center, np.array([box_width / 2.0, span, span]), rotation)
        frac = sample_cache.box_fraction(box)
        if lo <= frac <= hi:
            boxes.append(box)
            if len(boxes) == count:
                return boxes
    raise BudgetExhaustedError(
        f"could not find {count} cuts with volume fraction in [{lo}, {hi}] "
        f"after {budget} proposals ({len(boxes)} found)"
    )


def project_golden_standard(
    source: TriangleMesh,
    complete_target: TriangleMesh,
    removed,
    forward_maps,
    vote_min: int,
) -> LabelField:
    """Reference missing labels on the source: a vertex is missing if its
    forward correspondence lands on a removed target vertex, harmonised
    across maps by majority vote."""
    removed = np.asarray(sorted(set(int(i) for i in removed)), dtype=np.int64)
    if len(removed) and (removed.min() < 0 or removed.max() >= complete_target.vertex_count):
        raise ValidationError("removed indices out of range for the complete target mesh")
    fields = []
    for fmap in forward_maps:
        if fmap.source_count != source.vertex_count:
            raise ValidationError(
                f"forward map covers {fmap.source_count} vertices, source has {source.vertex_count}"
            )
        if fmap.target_count != complete_target.vertex_count:
            raise ValidationError(
                f"forward map targets {fmap.target_count} vertices, complete target has "
                f"{complete_target.vertex_count}"
            )
        fields.append(LabelField(np.isin(fmap.assignment, removed)))
    return vote(fields, vote_min)


# ---------------------------------------------------------------- file IO


def save_removed_csv(indices, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex"])
        for i in indices:
            w.writerow([int(i)])


def load_removed_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["vertex"]:
        raise ValidationError(f"{path}: expected header 'vertex'")
    return np.array([int(r[0]) for r in rows[1:]], dtype=np.int64)

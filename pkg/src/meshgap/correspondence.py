"""Directional vertex correspondences and predictors.

The predictors stand in for a trained correspondence model: a deterministic
nearest-neighbour oracle, a seeded jittered variant (to emulate an ensemble of
models), an identity map, and maps loaded from file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import MeshFormatError, ValidationError
from .mesh import TriangleMesh

KINDS = ("identity", "nn", "nnjitter", "file")


@dataclass(frozen=True)
class CorrespondenceMap:
    """Assigns a target vertex index to every source vertex. Directional:
    not required to be injective or surjective."""

    source_count: int
    target_count: int
    assignment: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.assignment, dtype=np.int64))
        if a.ndim != 1 or len(a) != self.source_count:
            raise ValidationError(
                f"assignment length {a.shape} does not match source_count {self.source_count}"
            )
        if len(a) and (a.min() < 0 or a.max() >= self.target_count):
            raise ValidationError(
                f"assignment entries must lie in [0, {self.target_count})"
            )
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @staticmethod
    def identity(n: int) -> "CorrespondenceMap":
        return CorrespondenceMap(n, n, np.arange(n, dtype=np.int64))


def compose(forward: CorrespondenceMap, backward: CorrespondenceMap) -> CorrespondenceMap:
    """result(i) = backward(forward(i))."""
    if forward.target_count != backward.source_count:
        raise ValidationError(
            f"cannot compose: forward.target_count {forward.target_count} != "
            f"backward.source_count {backward.source_count}"
        )
    return CorrespondenceMap(
        forward.source_count, backward.target_count, backward.assignment[forward.assignment]
    )


@dataclass(frozen=True)
class PredictorSpec:
    """Which correspondence predictor to run.

    kind: identity | nn | nnjitter | file
    nnjitter requires seed and jitter_sigma; file requires path.
    """

    kind: str
    seed: int | None = None
    jitter_sigma: float | None = None
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown predictor kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "nnjitter":
            if self.seed is None or self.jitter_sigma is None:
                raise ValidationError("nnjitter predictor requires seed and jitter_sigma")
            if self.jitter_sigma < 0:
                raise ValidationError("jitter_sigma must be >= 0")
        if self.kind == "file" and not self.path:
            raise ValidationError("file predictor requires a path")

    @staticmethod
    def parse(text: str) -> "PredictorSpec":
        """Parse CLI spec strings: identity | nn | nnjitter:sigma=1.0,seed=3 | file:<path>."""
        head, _, rest = text.partition(":")
        if head == "identity":
            return PredictorSpec("identity")
        if head == "nn":
            return PredictorSpec("nn")
        if head == "file":
            if not rest:
                raise ValidationError(f"predictor spec {text!r}: file needs a path")
            return PredictorSpec("file", path=rest)
        if head == "nnjitter":
            sigma = seed = None
            for part in filter(None, rest.split(",")):
                key, _, val = part.partition("=")
                if key == "sigma":
                    sigma = float(val)
                elif key == "seed":
                    seed = int(val)
                else:
                    raise ValidationError(f"predictor spec {text!r}: unknown key {key!r}")
            if sigma is None or seed is None:
                raise ValidationError(f"predictor spec {text!r}: need sigma= and seed=")
            return PredictorSpec("nnjitter", seed=seed, jitter_sigma=sigma)
        raise ValidationError(f"unknown predictor spec {text!r}")

    def describe(self) -> str:
        if self.kind == "nnjitter":
            return f"nnjitter:sigma={self.jitter_sigma},seed={self.seed}"
        if self.kind == "file":
            return f"file:{self.path}"
        return self.kind


def _nearest(source_pts: np.ndarray, target_pts: np.ndarray) -> np.ndarray:
    """Brute-force nearest target index per source point; ties -> lowest index."""
    out = np.empty(len(source_pts), dtype=np.int64)
    chunk = max(1, 8_000_000 // max(len(target_pts), 1))
    for s in range(0, len(source_pts), chunk):
        d = cdist(source_pts[s : s + chunk], target_pts, metric="sqeuclidean")
        out[s : s + chunk] = np.argmin(d, axis=1)
    return out


def predict(spec: PredictorSpec, source: TriangleMesh, target: TriangleMesh) -> CorrespondenceMap:
    """Run a predictor on a (source, target) mesh pair.

    nn: exact nearest-neighbour by Euclidean distance, ties to the lowest
    target index. nnjitter: distances measured against target vertices
    displaced by seeded Gaussian noise (numpy PCG64 via default_rng), while
    the returned indices refer to the unjittered target.
    """
    ns, nt = source.vertex_count, target.vertex_count
    if spec.kind == "identity":
        if ns != nt:
            raise ValidationError(
                f"identity predictor requires equal vertex counts ({ns} != {nt})"
            )
        return CorrespondenceMap.identity(ns)
    if spec.kind == "nn":
        return CorrespondenceMap(ns, nt, _nearest(source.vertices, target.vertices))
    if spec.kind == "nnjitter":
        rng = np.random.default_rng(spec.seed)
        jittered = target.vertices + spec.jitter_sigma * rng.standard_normal((nt, 3))
        return CorrespondenceMap(ns, nt, _nearest(source.vertices, jittered))
    cmap = load_correspondence(spec.path)
    if cmap.source_count != ns or cmap.target_count != nt:
        raise ValidationError(
            f"correspondence file {spec.path} declares {cmap.source_count}->{cmap.target_count}"
            f" but meshes have {ns}->{nt} vertices"
        )
    return cmap


# ---------------------------------------------------------------- file IO


def load_correspondence(path) -> CorrespondenceMap:
    """Plain-text format: header '<source_count> <target_count>', then one
    zero-based target index per line; '#' lines are comments."""
    path = Path(path)
    if not path.is_file():
        raise MeshFormatError(f"correspondence file not found: {path}")
    rows = [
        ln.strip()
        for ln in path.read_text(encoding="ascii").splitlines()
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not rows:
        raise MeshFormatError(f"{path}: empty correspondence file")
    try:
        ns, nt = (int(tok) for tok in rows[0].split())
    except ValueError as exc:
        raise MeshFormatError(f"{path}: bad header line {rows[0]!r}") from exc
    if len(rows) - 1 != ns:
        raise MeshFormatError(f"{path}: expected {ns} entries, found {len(rows) - 1}")
    try:
        assignment = np.array([int(r) for r in rows[1:]], dtype=np.int64)
    except ValueError as exc:
        raise MeshFormatError(f"{path}: non-integer entry: {exc}") from exc
    if len(assignment) and (assignment.min() < 0 or assignment.max() >= nt):
        raise MeshFormatError(f"{path}: entry out of range [0, {nt})")
    return CorrespondenceMap(ns, nt, assignment)


def save_correspondence(cmap: CorrespondenceMap, path) -> None:
    lines = [f"{cmap.source_count} {cmap.target_count}"]
    lines += [str(int(i)) for i in cmap.assignment]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")

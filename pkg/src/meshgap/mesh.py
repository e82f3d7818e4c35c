"""Triangle-mesh representation, ASCII OFF/PLY IO, adjacency and geometry.

All coordinates are millimetres. Meshes are immutable after construction;
every operation returns new objects.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeometryError, MeshFormatError, ValidationError

logger = logging.getLogger(__name__)

_FORMATS = ("off", "ply")


def _fmt(x: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(x))


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle surface mesh.

    vertices: (n, 3) float64 array, millimetres.
    faces: (m, 3) int64 array of vertex indices.
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str | None = None

    def __post_init__(self):
        verts = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        faces = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValidationError("vertices must be an (n, 3) array")
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValidationError("faces must be an (m, 3) array")
        if len(verts) < 3:
            raise ValidationError(f"mesh needs at least 3 vertices, got {len(verts)}")
        if not np.all(np.isfinite(verts)):
            raise ValidationError("vertex coordinates must be finite")
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(verts):
                raise ValidationError(
                    f"face index out of range [0, {len(verts)}): "
                    f"min={faces.min()}, max={faces.max()}"
                )
            degen = (
                (faces[:, 0] == faces[:, 1])
                | (faces[:, 1] == faces[:, 2])
                | (faces[:, 0] == faces[:, 2])
            )
            if degen.any():
                raise ValidationError(
                    f"{degen.sum()} face(s) repeat a vertex index, e.g. face "
                    f"{int(np.nonzero(degen)[0][0])}"
                )
            # Zero-area faces are tolerated: box cuts can leave slivers.
            a = verts[faces[:, 1]] - verts[faces[:, 0]]
            b = verts[faces[:, 2]] - verts[faces[:, 0]]
            area2 = np.linalg.norm(np.cross(a, b), axis=1)
            nzero = int((area2 == 0.0).sum())
            if nzero:
                logger.warning("mesh %s has %d zero-area face(s)", self.name, nzero)
        verts.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def translated(self, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=float), self.faces, self.name)


@dataclass(frozen=True)
class AdjacencyIndex:
    """Per-vertex sorted 1-ring neighbour lists derived from shared face edges."""

    neighbors: tuple  # tuple of sorted int64 arrays, one per vertex
    _padded: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def vertex_count(self) -> int:
        return len(self.neighbors)

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def padded(self) -> tuple[np.ndarray, np.ndarray]:
        """(n, maxdeg) neighbour matrix padded with the vertex's own index,
        plus the (n,) degree vector. Cached; used by vectorized filters."""
        if "m" not in self._padded:
            n = self.vertex_count
            deg = np.array([len(nb) for nb in self.neighbors], dtype=np.int64)
            maxdeg = int(deg.max()) if n else 0
            mat = np.repeat(np.arange(n, dtype=np.int64)[:, None], max(maxdeg, 1), axis=1)
            for i, nb in enumerate(self.neighbors):
                mat[i, : len(nb)] = nb
            self._padded["m"] = (mat, deg)
        return self._padded["m"]


def build_adjacency(mesh: TriangleMesh) -> AdjacencyIndex:
    """Vertex adjacency over shared face edges; isolated vertices get empty lists."""
    n = mesh.vertex_count
    f = mesh.faces
    if len(f) == 0:
        return AdjacencyIndex(tuple(np.empty(0, dtype=np.int64) for _ in range(n)))
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    lo = edges.min(axis=1)
    hi = edges.max(axis=1)
    uniq = np.unique(lo * np.int64(n) + hi)
    lo, hi = uniq // n, uniq % n
    neighbors = [[] for _ in range(n)]
    for a, b in zip(lo.tolist(), hi.tolist()):
        neighbors[a].append(b)
        neighbors[b].append(a)
    return AdjacencyIndex(tuple(np.array(sorted(nb), dtype=np.int64) for nb in neighbors))


def adjacency_from_edges(n: int, edges) -> AdjacencyIndex:
    """Build an AdjacencyIndex directly from an undirected edge list."""
    neighbors = [set() for _ in range(n)]
    for a, b in edges:
        if a == b:
            raise ValidationError("self-loop edges are not allowed")
        if not (0 <= a < n and 0 <= b < n):
            raise ValidationError(f"edge ({a}, {b}) out of range for {n} vertices")
        neighbors[a].add(b)
        neighbors[b].add(a)
    return AdjacencyIndex(tuple(np.array(sorted(nb), dtype=np.int64) for nb in neighbors))


# ---------------------------------------------------------------- file IO


def _infer_format(path: Path, format: str | None) -> str:
    if format is not None:
        fmt = format.lower()
        if fmt not in _FORMATS:
            raise ValidationError(f"unknown mesh format {format!r}; expected one of {_FORMATS}")
        return fmt
    suffix = path.suffix.lower().lstrip(".")
    if suffix in _FORMATS:
        return suffix
    raise ValidationError(f"cannot infer mesh format from {path.name!r}; pass format=")


def load_mesh(path, format: str | None = None) -> TriangleMesh:
    """Load an ASCII OFF or PLY mesh. Binary files are rejected."""
    path = Path(path)
    if not path.is_file():
        raise MeshFormatError(f"mesh file not found: {path}")
    fmt = _infer_format(path, format)
    try:
        text = path.read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise MeshFormatError(f"{path}: not an ASCII file (binary meshes are unsupported)") from exc
    if fmt == "off":
        verts, faces = _parse_off(text, str(path))
    else:
        verts, faces = _parse_ply(text, str(path))
    return TriangleMesh(verts, faces, name=path.stem)


def save_mesh(mesh: TriangleMesh, path, format: str | None = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, format)
    lines = _emit_off(mesh) if fmt == "off" else _emit_ply(mesh)
    try:
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as exc:
        raise OSError(f"cannot write mesh to {path}: {exc}") from exc


def _tokens(text: str):
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        yield from line.split()


def _parse_off(text: str, where: str):
    toks = _tokens(text)
    try:
        magic = next(toks)
    except StopIteration:
        raise MeshFormatError(f"{where}: empty OFF file")
    if magic != "OFF":
        raise MeshFormatError(f"{where}: missing OFF header (got {magic!r})")
    try:
        nv = int(next(toks))
        nf = int(next(toks))
        next(toks)  # edge count, ignored
        verts = np.array([float(next(toks)) for _ in range(3 * nv)]).reshape(nv, 3)
        faces = []
        for _ in range(nf):
            cnt = int(next(toks))
            if cnt != 3:
                raise MeshFormatError(f"{where}: only triangular faces supported, got {cnt}-gon")
            faces.append([int(next(toks)) for _ in range(3)])
    except StopIteration:
        raise MeshFormatError(f"{where}: truncated OFF file")
    except ValueError as exc:
        raise MeshFormatError(f"{where}: malformed OFF token: {exc}") from exc
    return verts, np.array(faces, dtype=np.int64).reshape(len(faces), 3)


def _emit_off(mesh: TriangleMesh):
    lines = ["OFF", f"{mesh.vertex_count} {mesh.face_count} 0"]
    for v in mesh.vertices:
        lines.append(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
    for f in mesh.faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    return lines


def _parse_ply(text: str, where: str):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshFormatError(f"{where}: missing 'ply' magic line")
    nv = nf = None
    in_vertex = in_face = False
    vertex_props: list[str] = []
    body_start = None
    fmt_seen = False
    for k, raw in enumerate(lines[1:], start=1):
        parts = raw.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1:] != ["ascii", "1.0"]:
                raise MeshFormatError(
                    f"{where}: unsupported PLY format {' '.join(parts[1:])!r}; only ascii 1.0"
                )
            fmt_seen = True
        elif parts[0] == "element":
            in_vertex = in_face = False
            if parts[1] == "vertex":
                nv = int(parts[2])
                in_vertex = True
            elif parts[1] == "face":
                nf = int(parts[2])
                in_face = True
            else:
                raise MeshFormatError(f"{where}: unsupported PLY element {parts[1]!r}")
        elif parts[0] == "property":
            if in_vertex:
                if parts[1] not in ("float", "float32", "double", "float64"):
                    raise MeshFormatError(f"{where}: vertex property {parts[-1]!r} must be float")
                vertex_props.append(parts[-1])
            elif in_face:
                if parts[1] != "list":
                    raise MeshFormatError(f"{where}: face property must be a list")
        elif parts[0] == "end_header":
            body_start = k + 1
            break
        else:
            raise MeshFormatError(f"{where}: unexpected PLY header line {raw!r}")
    if body_start is None or not fmt_seen or nv is None or nf is None:
        raise MeshFormatError(f"{where}: incomplete PLY header")
    if vertex_props[:3] != ["x", "y", "z"]:
        raise MeshFormatError(f"{where}: vertex properties must start with x y z, got {vertex_props}")
    body = [ln.split() for ln in lines[body_start:] if ln.strip()]
    if len(body) < nv + nf:
        raise MeshFormatError(f"{where}: truncated PLY body")
    try:
        verts = np.array([[float(row[i]) for i in range(3)] for row in body[:nv]])
        faces = []
        for row in body[nv : nv + nf]:
            if int(row[0]) != 3:
                raise MeshFormatError(f"{where}: only triangular faces supported")
            faces.append([int(row[1]), int(row[2]), int(row[3])])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError(f"{where}: malformed PLY body: {exc}") from exc
    return verts, np.array(faces, dtype=np.int64).reshape(len(faces), 3)


def _emit_ply(mesh: TriangleMesh):
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.vertex_count}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {mesh.face_count}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for v in mesh.vertices:
        lines.append(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
    for f in mesh.faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    return lines


# ---------------------------------------------------------------- geometry


def signed_volume(mesh: TriangleMesh) -> float:
    """Divergence-theorem volume: sum of signed origin-tetrahedra over faces.

    Positive for a closed, outward-oriented surface.
    """
    v = mesh.vertices
    f = mesh.faces
    if len(f) == 0:
        return 0.0
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


_BASE_DIRECTION = np.array([0.0, 0.0, 1.0])
_MAX_RAY_RETRIES = 8


def _retry_directions():
    """Fixed, seeded sequence of fallback ray directions (deterministic policy)."""
    rng = np.random.default_rng(0x9E3779B9)
    dirs = [_BASE_DIRECTION]
    for _ in range(_MAX_RAY_RETRIES):
        d = _BASE_DIRECTION + 0.35 * rng.standard_normal(3)
        dirs.append(d / np.linalg.norm(d))
    return dirs


_RETRY_DIRECTIONS = _retry_directions()


def _ray_hits_axis_z(mesh: TriangleMesh, pts: np.ndarray):
    """Strict/near hit counts for rays along +z, with face-bbox prefilter.

    Returns (odd_parity bool array, degenerate bool array).
    """
    tri = mesh.vertices[mesh.faces]
    fmin = tri.min(axis=1)
    fmax = tri.max(axis=1)
    scale = float(np.max(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)) or 1.0)
    eps_t = 1e-9 * scale
    eps_b = 1e-10
    k = len(pts)
    counts = np.zeros(k, dtype=np.int64)
    degen = np.zeros(k, dtype=bool)
    chunk = max(1, 4_000_000 // max(len(tri), 1))
    for s in range(0, k, chunk):
        p = pts[s : s + chunk]
        cand = (
            (p[:, 0, None] >= fmin[None, :, 0])
            & (p[:, 0, None] <= fmax[None, :, 0])
            & (p[:, 1, None] >= fmin[None, :, 1])
            & (p[:, 1, None] <= fmax[None, :, 1])
            & (p[:, 2, None] <= fmax[None, :, 2])
        )
        pi, fi = np.nonzero(cand)
        if len(pi) == 0:
            continue
        strict, near = _moller_trumbore(tri[fi], p[pi], _BASE_DIRECTION, eps_t, eps_b)
        np.add.at(counts, pi + s, strict.astype(np.int64))
        np.logical_or.at(degen, pi + s, near)
    return (counts % 2).astype(bool), degen


def _ray_hits_general(mesh: TriangleMesh, pts: np.ndarray, direction: np.ndarray):
    tri = mesh.vertices[mesh.faces]
    scale = float(np.max(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)) or 1.0)
    eps_t = 1e-9 * scale
    eps_b = 1e-10
    k = len(pts)
    counts = np.zeros(k, dtype=np.int64)
    degen = np.zeros(k, dtype=bool)
    m = len(tri)
    pi = np.repeat(np.arange(k), m)
    fi = np.tile(np.arange(m), k)
    strict, near = _moller_trumbore(tri[fi], pts[pi], direction, eps_t, eps_b)
    np.add.at(counts, pi, strict.astype(np.int64))
    np.logical_or.at(degen, pi, near)
    return (counts % 2).astype(bool), degen


def _moller_trumbore(tri, origins, direction, eps_t, eps_b):
    """Per (triangle, origin) pair: strict interior hit and near-degenerate hit flags."""
    v0 = tri[:, 0]
    e1 = tri[:, 1] - v0
    e2 = tri[:, 2] - v0
    d = np.asarray(direction, dtype=float)
    h = np.cross(d[None, :], e2)
    a = np.einsum("ij,ij->i", e1, h)
    nonpar = np.abs(a) > 1e-14 * max(1.0, eps_t / 1e-9) ** 2
    inv = np.zeros_like(a)
    inv[nonpar] = 1.0 / a[nonpar]
    s = origins - v0
    u = np.einsum("ij,ij->i", s, h) * inv
    q = np.cross(s, e1)
    v = (q @ d) * inv
    t = np.einsum("ij,ij->i", q, e2) * inv
    loose = nonpar & (u >= -eps_b) & (v >= -eps_b) & (u + v <= 1 + eps_b) & (t > 0)
    strict = loose & (u > eps_b) & (v > eps_b) & (u + v < 1 - eps_b) & (t > eps_t)
    near = loose & ~strict
    return strict, near


def points_in_mesh(mesh: TriangleMesh, points) -> np.ndarray:
    """Ray-casting parity test for many points at once.

    Deterministic: the primary ray is +z; degenerate hits (edge/vertex grazes)
    are re-cast along a fixed seeded sequence of jittered directions, at most
    8 retries before GeometryError.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    inside = np.zeros(len(pts), dtype=bool)
    pending = np.arange(len(pts))
    for attempt, direction in enumerate(_RETRY_DIRECTIONS):
        if attempt == 0:
            par, degen = _ray_hits_axis_z(mesh, pts[pending])
        else:
            par, degen = _ray_hits_general(mesh, pts[pending], direction)
        ok = ~degen
        inside[pending[ok]] = par[ok]
        pending = pending[degen]
        if len(pending) == 0:
            return inside
    raise GeometryError(
        f"{len(pending)} point(s) still hit mesh edges after {_MAX_RAY_RETRIES} ray re-casts"
    )


def point_in_mesh(mesh: TriangleMesh, p) -> bool:
    """True if point p (mm) lies inside the closed mesh."""
    return bool(points_in_mesh(mesh, np.asarray(p, dtype=float)[None, :])[0])

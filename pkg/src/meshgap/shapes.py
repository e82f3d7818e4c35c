"""Procedural fixture meshes: cube, icosphere, smooth deformations."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh


def unit_cube() -> TriangleMesh:
    """Axis-aligned [0,1]^3 cube, 12 outward-oriented triangles."""
    verts = np.array(
        [
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
            [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
        ],
        dtype=float,
    )
    faces = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom (z=0), normal -z
            [4, 5, 6], [4, 6, 7],  # top (z=1), normal +z
            [0, 1, 5], [0, 5, 4],  # y=0, normal -y
            [2, 3, 7], [2, 7, 6],  # y=1, normal +y
            [0, 4, 7], [0, 7, 3],  # x=0, normal -x
            [1, 2, 6], [1, 6, 5],  # x=1, normal +x
        ],
        dtype=np.int64,
    )
    return TriangleMesh(verts, faces, name="unit_cube")


def icosphere(subdivisions: int = 4, radius: float = 50.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Icosahedron subdivided `subdivisions` times and projected to `radius`.

    Vertex counts: 12, 42, 162, 642, 2562 for subdivisions 0..4.
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=float)
    return TriangleMesh(v, np.array(faces, dtype=np.int64), name=f"icosphere{subdivisions}")


def rotated(mesh: TriangleMesh, degrees: float, axis=(0.0, 0.0, 1.0)) -> TriangleMesh:
    """Mesh rigidly rotated about an axis through the origin."""
    from scipy.spatial.transform import Rotation

    ax = np.asarray(axis, dtype=float)
    rot = Rotation.from_rotvec(np.deg2rad(degrees) * ax / np.linalg.norm(ax)).as_matrix()
    return TriangleMesh(mesh.vertices @ rot.T, mesh.faces, name=mesh.name)


def bumpy_deformation(
    mesh: TriangleMesh,
    amplitude: float,
    length_scale: float,
    seed: int,
    n_bumps: int = 8,
) -> TriangleMesh:
    """Smooth seeded vector deformation built from Gaussian radial basis bumps.

    Bump centers are drawn from the mesh vertices; the summed displacement is
    rescaled so its largest magnitude equals `amplitude` (mm). Emulates
    anatomy changing between two scans of the same structure.
    """
    rng = np.random.default_rng(seed)
    v = mesh.vertices
    centers = v[rng.integers(0, len(v), size=n_bumps)]
    coeffs = rng.standard_normal((n_bumps, 3))
    disp = np.zeros_like(v)
    for c, a in zip(centers, coeffs):
        d2 = np.sum((v - c) ** 2, axis=1)
        disp += a[None, :] * np.exp(-d2 / (2.0 * length_scale**2))[:, None]
    peak = np.linalg.norm(disp, axis=1).max()
    if peak > 0:
        disp *= amplitude / peak
    return TriangleMesh(v + disp, mesh.faces, name=f"{mesh.name}_deformed")

import numpy as np
import pytest

from meshgap.shapes import icosphere, unit_cube
from meshgap.mesh import TriangleMesh
from meshgap.resect import CutBox, cut_mesh


@pytest.fixture(scope="session")
def cube():
    return unit_cube()


@pytest.fixture(scope="session")
def sphere():
    return icosphere(4, 50.0)


@pytest.fixture(scope="session")
def small_sphere():
    return icosphere(2, 50.0)


@pytest.fixture(scope="session")
def cap_cut_pair(sphere):
    """Source sphere plus a target with the x > 35 mm cap sliced off."""
    box = CutBox(center=(50.0, 0.0, 0.0), half_extents=(15.0, 120.0, 120.0))
    res = cut_mesh(sphere, box, volume_samples=5_000, seed=3)
    return sphere, res, box


def random_mesh(rng, n_verts=None):
    """Small random valid mesh (possibly with isolated vertices)."""
    n = int(n_verts or rng.integers(3, 12))
    verts = rng.uniform(-10, 10, size=(n, 3))
    n_faces = int(rng.integers(1, 2 * n))
    faces = []
    for _ in range(n_faces):
        tri = rng.choice(n, size=3, replace=False)
        faces.append(tri)
    return TriangleMesh(verts, np.array(faces, dtype=np.int64))

import numpy as np
import pytest

from meshgap.correspondence import CorrespondenceMap, PredictorSpec, predict
from meshgap.errors import BudgetExhaustedError, ValidationError
from meshgap.resect import (
    CutBox,
    VolumeSampleCache,
    cut_mesh,
    load_removed_csv,
    plan_cuts,
    project_golden_standard,
    save_removed_csv,
)

HALF_BOX = CutBox(center=(1.0, 0.5, 0.5), half_extents=(0.5, 1.0, 1.0))  # interior x in (0.5, 1.5)


class TestCutBox:
    def test_positive_extents(self):
        with pytest.raises(ValidationError):
            CutBox((0, 0, 0), (1.0, -1.0, 1.0))

    def test_orthonormal_rotation(self):
        with pytest.raises(ValidationError):
            CutBox((0, 0, 0), (1, 1, 1), rotation=np.ones((3, 3)))

    def test_strict_interior(self):
        box = CutBox((0, 0, 0), (1, 1, 1))
        assert box.contains([[0.0, 0.0, 0.0]])[0]
        assert not box.contains([[1.0, 0.0, 0.0]])[0]  # on the face: not inside

    def test_json_round_trip(self):
        rot = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
        box = CutBox((1, 2, 3), (4, 5, 6), rot)
        back = CutBox.from_json_dict(box.to_json_dict())
        np.testing.assert_array_equal(back.center, box.center)
        np.testing.assert_array_equal(back.rotation, box.rotation)


class TestCutMesh:
    def test_disjoint_box_no_change(self, cube):
        box = CutBox((10, 10, 10), (1, 1, 1))
        res = cut_mesh(cube, box, volume_samples=2_000, seed=1)
        assert len(res.removed_vertex_indices) == 0
        assert res.removed_volume_fraction == 0.0
        assert res.removed_vertex_fraction == 0.0
        np.testing.assert_array_equal(res.cut_mesh.vertices, cube.vertices)
        np.testing.assert_array_equal(res.cut_mesh.faces, cube.faces)

    def test_half_cube(self, cube):
        res = cut_mesh(cube, HALF_BOX, volume_samples=100_000, seed=2)
        removed_expected = np.nonzero(cube.vertices[:, 0] == 1.0)[0]
        np.testing.assert_array_equal(res.removed_vertex_indices, removed_expected)
        assert res.removed_volume_fraction == pytest.approx(0.5, abs=0.02)
        assert res.removed_vertex_fraction == 0.5

    def test_box_enclosing_everything(self, cube):
        box = CutBox((0.5, 0.5, 0.5), (10, 10, 10))
        with pytest.raises(ValidationError, match="every vertex"):
            cut_mesh(cube, box, volume_samples=100, seed=0)

    def test_surviving_faces_valid_and_reindexed(self, sphere):
        box = CutBox((50, 0, 0), (15, 120, 120))
        res = cut_mesh(sphere, box, volume_samples=2_000, seed=1)
        cut = res.cut_mesh
        assert cut.faces.min() >= 0
        assert cut.faces.max() < cut.vertex_count
        # index_map is a bijection survivors <-> [0, new_count)
        survivors = np.setdiff1d(np.arange(sphere.vertex_count), res.removed_vertex_indices)
        mapped = res.index_map[survivors]
        assert sorted(mapped.tolist()) == list(range(cut.vertex_count))
        assert np.all(res.index_map[res.removed_vertex_indices] == -1)
        np.testing.assert_array_equal(cut.vertices, sphere.vertices[survivors])
        # removed set is exactly the strict interior of the box
        np.testing.assert_array_equal(
            res.removed_vertex_indices, np.nonzero(box.contains(sphere.vertices))[0]
        )

    def test_monte_carlo_converges(self, cube):
        a = cut_mesh(cube, HALF_BOX, volume_samples=50_000, seed=5).removed_volume_fraction
        b = cut_mesh(cube, HALF_BOX, volume_samples=100_000, seed=5).removed_volume_fraction
        assert abs(a - b) < 0.01

    def test_sample_cache_reused(self, cube):
        cache = VolumeSampleCache.build(cube, 20_000, 9)
        a = cut_mesh(cube, HALF_BOX, sample_cache=cache)
        b = cut_mesh(cube, HALF_BOX, sample_cache=cache)
        assert a.removed_volume_fraction == b.removed_volume_fraction


class TestPlanCuts:
    def test_sphere_paper_configuration(self, sphere):
        cache = VolumeSampleCache.build(sphere, 30_000, 21)
        boxes = plan_cuts(sphere, 35, 30.0, 21, (0.11, 0.28), sample_cache=cache)
        assert len(boxes) == 35
        for box in boxes:
            frac = cache.box_fraction(box)
            assert 0.11 <= frac <= 0.28

    def test_infeasible_range(self, small_sphere):
        cache = VolumeSampleCache.build(small_sphere, 5_000, 3)
        with pytest.raises(BudgetExhaustedError, match="proposals"):
            plan_cuts(small_sphere, 2, 30.0, 3, (0.99, 0.999), sample_cache=cache)

    def test_deterministic(self, small_sphere):
        cache = VolumeSampleCache.build(small_sphere, 10_000, 4)
        a = plan_cuts(small_sphere, 3, 30.0, 4, (0.11, 0.28), sample_cache=cache)
        b = plan_cuts(small_sphere, 3, 30.0, 4, (0.11, 0.28), sample_cache=cache)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.center, y.center)
            np.testing.assert_array_equal(x.rotation, y.rotation)

    def test_reverified_with_independent_seed(self, sphere):
        cache = VolumeSampleCache.build(sphere, 30_000, 21)
        boxes = plan_cuts(sphere, 5, 30.0, 21, (0.11, 0.28), sample_cache=cache)
        other = VolumeSampleCache.build(sphere, 30_000, 777)
        for box in boxes:
            assert 0.11 - 0.01 <= other.box_fraction(box) <= 0.28 + 0.01

    def test_bad_fraction_range(self, small_sphere):
        with pytest.raises(ValidationError):
            plan_cuts(small_sphere, 1, 30.0, 0, (0.5, 0.4))


class TestProjectGoldenStandard:
    def test_empty_removed(self, small_sphere):
        i = CorrespondenceMap.identity(small_sphere.vertex_count)
        out = project_golden_standard(small_sphere, small_sphere, set(), [i], 1)
        assert not out.labels.any()

    def test_identity_map_indicator(self, small_sphere):
        i = CorrespondenceMap.identity(small_sphere.vertex_count)
        out = project_golden_standard(small_sphere, small_sphere, {5, 7}, [i], 1)
        assert sorted(np.nonzero(out.labels)[0].tolist()) == [5, 7]

    def test_jittered_ensemble_close_to_plain_nn(self, cap_cut_pair):
        sphere, res, _ = cap_cut_pair
        removed = res.removed_vertex_indices
        jitter_maps = [
            predict(PredictorSpec("nnjitter", seed=100 + k, jitter_sigma=1.0), sphere, sphere)
            for k in range(5)
        ]
        golden = project_golden_standard(sphere, sphere, removed, jitter_maps, 3)
        nn_map = predict(PredictorSpec("nn"), sphere, sphere)
        plain = project_golden_standard(sphere, sphere, removed, [nn_map], 1)
        symdiff = np.logical_xor(golden.labels, plain.labels).sum()
        assert symdiff < 0.10 * len(removed)

    def test_count_mismatch(self, small_sphere, cube):
        i = CorrespondenceMap.identity(cube.vertex_count)
        with pytest.raises(ValidationError):
            project_golden_standard(small_sphere, cube, {0}, [i], 1)


class TestRemovedCsv:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "removed.csv"
        save_removed_csv([3, 1, 4], p)
        np.testing.assert_array_equal(load_removed_csv(p), [3, 1, 4])

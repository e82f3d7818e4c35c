import numpy as np
import pytest

from meshgap.correspondence import (
    CorrespondenceMap,
    PredictorSpec,
    compose,
    load_correspondence,
    predict,
    save_correspondence,
)
from meshgap.errors import MeshFormatError, ValidationError
from meshgap.mesh import TriangleMesh


def point_mesh(points):
    """Mesh whose vertex list is the given points (one dummy face)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    while len(pts) < 3:
        pts = np.vstack([pts, pts[-1] + [1000.0, 1000.0, 1000.0]])
    return TriangleMesh(pts, [[0, 1, 2]])


def brute_nearest(src, tgt):
    out = []
    for p in src:
        best, best_d = 0, None
        for j, q in enumerate(tgt):
            d = float(np.sum((p - q) ** 2))
            if best_d is None or d < best_d:
                best, best_d = j, d
        out.append(best)
    return out


class TestCorrespondenceMap:
    def test_length_invariant(self):
        with pytest.raises(ValidationError):
            CorrespondenceMap(3, 5, [0, 1])

    def test_range_invariant(self):
        with pytest.raises(ValidationError):
            CorrespondenceMap(3, 5, [0, 1, 7])

    def test_not_injective_allowed(self):
        m = CorrespondenceMap(3, 5, [2, 2, 2])
        assert m.assignment.tolist() == [2, 2, 2]


class TestPredict:
    def test_identity(self, small_sphere):
        m = predict(PredictorSpec("identity"), small_sphere, small_sphere)
        assert m.assignment.tolist() == list(range(small_sphere.vertex_count))

    def test_identity_count_mismatch(self, cube, small_sphere):
        with pytest.raises(ValidationError, match="equal vertex counts"):
            predict(PredictorSpec("identity"), cube, small_sphere)

    def test_nn_nearest(self):
        src = point_mesh([[0, 0, 0]])
        tgt = point_mesh([[1, 0, 0], [5, 0, 0]])
        m = predict(PredictorSpec("nn"), src, tgt)
        assert m.assignment[0] == 0

    def test_nn_tie_lowest_index(self):
        src = point_mesh([[0, 0, 0]])
        tgt = point_mesh([[1, 0, 0], [-1, 0, 0]])
        m = predict(PredictorSpec("nn"), src, tgt)
        assert m.assignment[0] == 0

    def test_nn_deterministic(self, small_sphere, cube):
        a = predict(PredictorSpec("nn"), small_sphere, cube)
        b = predict(PredictorSpec("nn"), small_sphere, cube)
        np.testing.assert_array_equal(a.assignment, b.assignment)

    def test_nn_self_is_identity(self, small_sphere):
        m = predict(PredictorSpec("nn"), small_sphere, small_sphere)
        assert m.assignment.tolist() == list(range(small_sphere.vertex_count))

    def test_nn_matches_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            src = point_mesh(rng.uniform(-5, 5, size=(rng.integers(3, 200), 3)))
            # snapped to a coarse grid to provoke exact distance ties
            tgt_pts = np.round(rng.uniform(-5, 5, size=(rng.integers(3, 200), 3)) * 2) / 2
            tgt = point_mesh(tgt_pts)
            m = predict(PredictorSpec("nn"), src, tgt)
            assert m.assignment.tolist() == brute_nearest(src.vertices, tgt.vertices)

    def test_jitter_sigma_zero_equals_nn(self, small_sphere, cube):
        plain = predict(PredictorSpec("nn"), small_sphere, cube)
        jit = predict(PredictorSpec("nnjitter", seed=9, jitter_sigma=0.0), small_sphere, cube)
        np.testing.assert_array_equal(plain.assignment, jit.assignment)

    def test_jitter_seeded_reproducible(self, small_sphere):
        spec = PredictorSpec("nnjitter", seed=4, jitter_sigma=2.0)
        a = predict(spec, small_sphere, small_sphere)
        b = predict(spec, small_sphere, small_sphere)
        np.testing.assert_array_equal(a.assignment, b.assignment)

    def test_jitter_distinct_seeds_differ(self, small_sphere):
        a = predict(PredictorSpec("nnjitter", seed=1, jitter_sigma=5.0), small_sphere, small_sphere)
        b = predict(PredictorSpec("nnjitter", seed=2, jitter_sigma=5.0), small_sphere, small_sphere)
        assert not np.array_equal(a.assignment, b.assignment)

    def test_jitter_indices_refer_to_unjittered_target(self, small_sphere):
        m = predict(
            PredictorSpec("nnjitter", seed=1, jitter_sigma=1.0), small_sphere, small_sphere
        )
        assert m.target_count == small_sphere.vertex_count
        assert m.assignment.max() < small_sphere.vertex_count


class TestCompose:
    def test_identity_identity(self):
        i = CorrespondenceMap.identity(4)
        assert compose(i, i).assignment.tolist() == [0, 1, 2, 3]

    def test_hand_example(self):
        fwd = CorrespondenceMap(2, 2, [1, 1])
        bwd = CorrespondenceMap(2, 2, [0, 0])
        assert compose(fwd, bwd).assignment.tolist() == [0, 0]

    def test_right_identity(self):
        m = CorrespondenceMap(3, 4, [2, 0, 3])
        assert compose(m, CorrespondenceMap.identity(4)).assignment.tolist() == [2, 0, 3]

    def test_count_mismatch(self):
        with pytest.raises(ValidationError, match="compose"):
            compose(CorrespondenceMap(2, 3, [0, 1]), CorrespondenceMap(2, 2, [0, 1]))


class TestFileIO:
    def test_documented_example(self, tmp_path):
        p = tmp_path / "m.corr"
        p.write_text("3 5\n0\n4\n2\n")
        m = load_correspondence(p)
        assert (m.source_count, m.target_count) == (3, 5)
        assert m.assignment.tolist() == [0, 4, 2]

    def test_out_of_range_entry(self, tmp_path):
        p = tmp_path / "bad.corr"
        p.write_text("3 5\n0\n7\n2\n")
        with pytest.raises(MeshFormatError, match="range"):
            load_correspondence(p)

    def test_round_trip_random(self, tmp_path):
        rng = np.random.default_rng(0)
        m = CorrespondenceMap(100, 50, rng.integers(0, 50, size=100))
        p = tmp_path / "r.corr"
        save_correspondence(m, p)
        m2 = load_correspondence(p)
        assert (m2.source_count, m2.target_count) == (100, 50)
        np.testing.assert_array_equal(m2.assignment, m.assignment)

    def test_comments_ignored(self, tmp_path):
        p = tmp_path / "c.corr"
        p.write_text("# comment\n2 2\n1\n# another\n0\n")
        assert load_correspondence(p).assignment.tolist() == [1, 0]

    def test_from_file_predictor_validates_counts(self, tmp_path, cube, small_sphere):
        p = tmp_path / "m.corr"
        save_correspondence(CorrespondenceMap.identity(8), p)
        m = predict(PredictorSpec("file", path=str(p)), cube, cube)
        assert m.assignment.tolist() == list(range(8))
        with pytest.raises(ValidationError, match="declares"):
            predict(PredictorSpec("file", path=str(p)), cube, small_sphere)


class TestSpecParsing:
    @pytest.mark.parametrize(
        "text,kind",
        [("identity", "identity"), ("nn", "nn"),
         ("nnjitter:sigma=1.5,seed=7", "nnjitter"), ("file:/tmp/x.corr", "file")],
    )
    def test_parse_kinds(self, text, kind):
        assert PredictorSpec.parse(text).kind == kind

    def test_parse_round_trip(self):
        for text in ("identity", "nn", "nnjitter:sigma=1.5,seed=7", "file:/tmp/x.corr"):
            assert PredictorSpec.parse(text).describe() == text

    def test_nnjitter_requires_seed_and_sigma(self):
        with pytest.raises(ValidationError):
            PredictorSpec.parse("nnjitter:sigma=1.0")
        with pytest.raises(ValidationError):
            PredictorSpec("nnjitter", seed=1)

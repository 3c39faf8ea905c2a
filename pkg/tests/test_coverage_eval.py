"""Tests für die Abdeckungsauswertung"""
import numpy as np
import pytest
from pydantic import ValidationError

from app.models.coverage import CameraModel
from app.models.geometry import TriangleMesh
from app.services.coverage_eval import CoverageTracker, heading, visible_triangles
from app.services.env_map import axis_frame, cylinder_mesh


def facing_triangle(center, normal, size=0.05):
    """Gleichseitiges Dreieck um `center` mit Normale `normal`"""
    w, u, v = axis_frame(normal)
    angles = np.deg2rad([0.0, 120.0, 240.0])
    vertices = [np.asarray(center) + size * (np.cos(a) * u + np.sin(a) * v) for a in angles]
    return TriangleMesh.from_arrays(vertices, [[0, 1, 2]])


@pytest.fixture
def camera():
    return CameraModel(fov=70.0, range=1.2)


class TestVisibleTriangles:
    def test_triangle_in_front_is_visible(self, camera):
        mesh = facing_triangle((1, 0, 0), (-1, 0, 0))
        assert visible_triangles((0, 0, 0), (1, 0, 0), camera, mesh) == {0}

    def test_out_of_range(self):
        mesh = facing_triangle((1, 0, 0), (-1, 0, 0))
        short = CameraModel(fov=70.0, range=0.9)
        assert visible_triangles((0, 0, 0), (1, 0, 0), short, mesh) == set()

    def test_back_face_is_hidden(self, camera):
        mesh = facing_triangle((1, 0, 0), (-1, 0, 0))
        assert visible_triangles((2, 0, 0), (-1, 0, 0), camera, mesh) == set()

    def test_outside_cone(self, camera):
        mesh = facing_triangle((1, 0, 0), (-1, 0, 0))
        assert visible_triangles((0, 0, 0), (0, 1, 0), camera, mesh) == set()

    def test_cone_boundary_is_inclusive(self, camera):
        """Schwerpunkt genau auf dem halben Öffnungswinkel zählt als sichtbar"""
        half = np.deg2rad(35.0)
        center = np.array([np.cos(half), np.sin(half), 0.0])
        mesh = facing_triangle(center, -center)
        assert visible_triangles((0, 0, 0), (1, 0, 0), camera, mesh) == {0}

        beyond = np.deg2rad(35.5)
        center = np.array([np.cos(beyond), np.sin(beyond), 0.0])
        mesh = facing_triangle(center, -center)
        assert visible_triangles((0, 0, 0), (1, 0, 0), camera, mesh) == set()

    def test_empty_mesh(self, camera):
        assert visible_triangles((0, 0, 0), (1, 0, 0), camera, TriangleMesh.from_arrays([], [])) == set()


class TestCoverageTracker:
    def test_ratio_is_monotone_and_bounded(self, camera):
        """Umrundung eines Zylinders: Abdeckung steigt monoton bis nahe 1"""
        mesh = cylinder_mesh((0, 0, 0), (0, 0, 1), 0.35, 0.4, segments=24, rings=2)
        tracker = CoverageTracker(mesh)
        ratios = []
        for angle in np.linspace(0.0, 2.0 * np.pi, 37):
            position = np.array([0.8 * np.cos(angle), 0.8 * np.sin(angle), 0.2])
            ratios.append(tracker.update_and_ratio(position, heading(angle + np.pi), camera))
        assert all(b >= a for a, b in zip(ratios, ratios[1:]))
        assert 0.0 < ratios[0] < 0.5
        assert ratios[-1] == pytest.approx(1.0)
        assert tracker.seen == set(range(len(mesh)))

    def test_seen_is_union_of_views(self, camera):
        mesh = TriangleMesh.from_arrays(
            np.vstack((facing_triangle((1, 0, 0), (-1, 0, 0)).vertices, facing_triangle((-1, 0, 0), (1, 0, 0)).vertices)),
            [[0, 1, 2], [3, 4, 5]],
        )
        tracker = CoverageTracker(mesh)
        assert tracker.update_and_ratio((0, 0, 0), (1, 0, 0), camera) == pytest.approx(0.5)
        assert tracker.update_and_ratio((0, 0, 0), (-1, 0, 0), camera) == pytest.approx(1.0)
        assert tracker.seen == {0, 1}

    def test_final_ratio_ignores_pose_order(self, camera):
        mesh = cylinder_mesh((0, 0, 0), (0, 0, 1), 0.35, 0.4, segments=24, rings=2)
        angles = np.linspace(0.0, np.pi, 7)
        poses = [
            (np.array([0.8 * np.cos(a), 0.8 * np.sin(a), 0.2]), heading(a + np.pi)) for a in angles
        ]
        reference = CoverageTracker(mesh)
        for position, direction in poses:
            expected = reference.update_and_ratio(position, direction, camera)
        assert 0.0 < expected < 1.0

        rng = np.random.default_rng(4)
        for i in range(5):
            tracker = CoverageTracker(mesh)
            for k in rng.permutation(len(poses)):
                ratio = tracker.update_and_ratio(poses[k][0], poses[k][1], camera)
            assert ratio == expected, f"Versuch {i + 1}"
            assert tracker.seen == reference.seen

    def test_empty_mesh_counts_as_covered(self, camera):
        tracker = CoverageTracker(TriangleMesh.from_arrays([], []))
        assert tracker.update_and_ratio((0, 0, 0), (1, 0, 0), camera) == 1.0


class TestCamera:
    def test_heading(self):
        np.testing.assert_allclose(heading(0.0), [1, 0, 0])
        np.testing.assert_allclose(heading(np.pi / 2), [0, 1, 0], atol=1e-12)

    @pytest.mark.parametrize("kwargs", [{"fov": 0.0}, {"fov": 180.0}, {"range": 0.0}])
    def test_invalid_camera(self, kwargs):
        with pytest.raises(ValidationError):
            CameraModel(**kwargs)

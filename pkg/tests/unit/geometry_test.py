import json

import numpy as np
import pytest

from src.common.custom_exceptions import DomainError, PathConstructionError, ScenarioFileError
from src.geometry.loader import PathSet, dump_path_set, load_path_set
from src.geometry.service import (
    build_path,
    find_intersection,
    max_curvature_ahead,
    pose_at,
    poses_along,
    project_onto,
)


class TestBuildPath:

    def test_straight_line(self, straight_road):
        """Arclength starts at 0 and grows strictly; curvature vanishes."""
        s = straight_road.cumulative_arclength
        assert s[0] == 0.0
        assert np.all(np.diff(s) > 0)
        assert straight_road.length == pytest.approx(200.0)
        assert np.allclose(straight_road.curvature, 0.0)
        assert np.allclose(straight_road.heading, 0.0)

    def test_circle_curvature(self, circle_path):
        """Three-point curvature of a circle of radius 10 m is 1/10, left turn positive."""
        assert np.allclose(circle_path.curvature, 0.1, rtol=1e-3)

    @pytest.mark.parametrize("chords", [8, 16, 32])
    def test_circle_sampled_at_any_density(self, chords):
        angles = np.linspace(0.0, np.pi, chords + 1)
        points = np.column_stack((10.0 * np.cos(angles), 10.0 * np.sin(angles)))
        path = build_path(points, step=5.0)
        assert np.allclose(path.curvature, 0.1, rtol=1e-9)

    def test_resampled_circle_curvature_converges(self):
        """Spline resampling of a coarsely sampled circle approaches 1/r as the input gets denser."""
        # Setup: half circle of radius 10 m with chords of about 4, 2 and 1 m
        errors = []
        for chords in (8, 16, 32):
            angles = np.linspace(0.0, np.pi, chords + 1)
            points = np.column_stack((10.0 * np.cos(angles), 10.0 * np.sin(angles)))

            # Run
            path = build_path(points)

            interior = (path.cumulative_arclength > 3.0) & (path.cumulative_arclength < path.length - 3.0)
            errors.append(float(np.median(np.abs(path.curvature[interior] - 0.1))))

        # Verify
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-3

    def test_heading_follows_segments(self, circle_path):
        seg = np.diff(circle_path.points, axis=0)
        expected = np.arctan2(seg[:, 1], seg[:, 0])
        assert np.allclose(circle_path.heading[:-1], expected)

    def test_coarse_input_is_resampled(self):
        """Sparse points go through the spline and come out at the 0.5 m step."""
        path = build_path([(0.0, 0.0), (10.0, 0.0), (20.0, 0.0)], name="sparse")
        assert path.size == 41
        assert np.all(np.diff(path.cumulative_arclength) <= 0.5 + 1e-6)
        assert tuple(path.points[-1]) == (20.0, 0.0)

    def test_too_few_points(self):
        with pytest.raises(PathConstructionError):
            build_path([(0.0, 0.0), (1.0, 0.0)])

    def test_duplicate_points(self):
        with pytest.raises(PathConstructionError, match="duplicate"):
            build_path([(0.0, 0.0), (0.1, 0.0), (0.1, 0.0), (0.2, 0.0)])

    def test_arrays_are_read_only(self, straight_road):
        with pytest.raises(ValueError):
            straight_road.points[0, 0] = 1.0


class TestPoses:

    def test_pose_at_interpolates(self, straight_road):
        pose = pose_at(straight_road, 12.25)
        assert pose.world_position == pytest.approx((12.25, 0.0))
        assert pose.heading == pytest.approx(0.0)
        assert pose.path_id == "road"

    def test_pose_outside_path(self, straight_road):
        with pytest.raises(DomainError):
            pose_at(straight_road, 250.0)
        with pytest.raises(DomainError):
            pose_at(straight_road, -1.0)

    def test_poses_along_extends_straight(self, circle_path):
        """Past the end the path continues along its last heading with zero curvature."""
        end = circle_path.length
        poses = poses_along(circle_path, np.array([end, end + 5.0]))
        h = circle_path.heading[-1]
        expected = circle_path.points[-1] + 5.0 * np.array([np.cos(h), np.sin(h)])
        assert (poses.x[1], poses.y[1]) == pytest.approx(tuple(expected))
        assert poses.curvature[1] == 0.0

    def test_poses_before_start(self, straight_road):
        poses = poses_along(straight_road, np.array([-3.0]))
        assert poses.x[0] == pytest.approx(-3.0)


class TestIntersection:

    def test_crossing_roads(self, straight_road):
        # Setup
        ys = np.linspace(-50.0, 50.0, 201)
        crossing = build_path(np.column_stack((np.full_like(ys, 80.0), ys)), name="cross")

        # Run
        point = find_intersection(crossing, straight_road)

        # Verify
        assert point.path_a == "cross" and point.path_b == "road"
        assert point.arclength_a == pytest.approx(50.0)
        assert point.arclength_b == pytest.approx(80.0)
        assert point.swapped().arclength_a == pytest.approx(80.0)

    def test_parallel_paths(self, straight_road):
        xs = np.linspace(0.0, 100.0, 201)
        parallel = build_path(np.column_stack((xs, np.full_like(xs, 3.5))), name="parallel")
        assert find_intersection(parallel, straight_road) is None

    def test_projection(self, t_scene):
        """A driver 10 m before the conflict point projects 10 m upstream on the main road."""
        conflict = t_scene.conflict_point
        projected = project_onto(t_scene.intersection, conflict - 10.0)
        assert projected == pytest.approx(t_scene.conflict_main - 10.0)

    def test_symmetric_under_swap(self, t_scene):
        forward = find_intersection(t_scene.route, t_scene.main)
        backward = find_intersection(t_scene.main, t_scene.route)
        assert backward.path_a == forward.path_b and backward.path_b == forward.path_a
        assert backward.arclength_a == pytest.approx(forward.arclength_b, abs=1e-6)
        assert backward.arclength_b == pytest.approx(forward.arclength_a, abs=1e-6)

    def test_world_positions_coincide(self, t_scene):
        on_route = pose_at(t_scene.route, t_scene.intersection.arclength_a).world_position
        on_main = pose_at(t_scene.main, t_scene.intersection.arclength_b).world_position
        assert np.hypot(on_route[0] - on_main[0], on_route[1] - on_main[1]) < 0.5


class TestCurvatureScan:

    def test_turn_found_ahead(self, t_scene):
        kappa, found = max_curvature_ahead(t_scene.route, 0.0, 0.05)
        assert found
        assert kappa == pytest.approx(0.1, rel=0.05)

    def test_nothing_past_the_turn(self, t_scene):
        kappa, found = max_curvature_ahead(t_scene.route, t_scene.conflict_point + 5.0, 0.05)
        assert not found
        assert kappa == 0.0


    def test_next_segment_not_global_maximum(self):
        """Two arcs ahead: the scan reports the nearer one even though the later one is sharper."""
        # Setup
        ds = 0.01
        s = np.arange(0.0, 60.0 + ds / 2, ds)
        kappa = np.select([(s >= 10) & (s < 20), (s >= 30) & (s < 40)], [0.08, 0.12], 0.0)
        heading = np.concatenate(([0.0], np.cumsum(kappa[:-1] * ds)))
        mid = 0.5 * (heading[1:] + heading[:-1])
        xy = np.column_stack((np.concatenate(([0.0], np.cumsum(np.cos(mid) * ds))),
                              np.concatenate(([0.0], np.cumsum(np.sin(mid) * ds)))))
        path = build_path(xy[::50], name="two_arcs")

        # Run
        first, found = max_curvature_ahead(path, 0.0, 0.05)
        second, _ = max_curvature_ahead(path, 25.0, 0.05)

        # Verify
        assert found
        assert first == pytest.approx(0.08, rel=0.02)
        assert second == pytest.approx(0.12, rel=0.02)


class TestPathSetFile:

    def test_dump_and_load(self, tmp_path):
        path_set = PathSet(paths={"a": [(0.1, 0.2), (1.0 / 3.0, 0.5), (2.0, 0.7)]})
        target = tmp_path / "paths.json"
        dump_path_set(path_set, target)
        loaded = load_path_set(target)
        assert loaded.paths == path_set.paths

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioFileError, match="not found"):
            load_path_set(tmp_path / "missing.json")

    def test_invalid_file(self, tmp_path):
        target = tmp_path / "bad.json"
        target.write_text(json.dumps({"paths": {"a": [[0, 0], [1, 1]]}}))
        with pytest.raises(ScenarioFileError):
            load_path_set(target)
